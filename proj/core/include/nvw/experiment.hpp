#pragma once

#include <optional>
#include <vector>

#include "nvw/config.hpp"
#include "nvw/geom_field.hpp"
#include "nvw/lockin_camera.hpp"
#include "nvw/recon.hpp"

namespace nvw {

/// Everything a config implies: circuit, NV model, camera, drive and the
/// per-ampere field map of the circuit.
struct ExperimentSetup {
  ExperimentConfig config;
  CircuitLayout layout;
  NVModel nv;
  CameraModel camera_model;
  AcquisitionConfig acquisition;  // mw_frequency_mhz left as configured (may be NaN)
  std::optional<Waveform> waveform;
  FieldMap per_amp;  // projected uT per ampere
  unsigned workers = 1;

  /// Throws ConfigError (and GeometryError for bad layouts).
  static ExperimentSetup from_config(const ExperimentConfig& config);

  LockinCamera camera() const { return LockinCamera(camera_model, nv); }
  Scene scene() const;

  /// Sensing resonance for the bias field alone.
  double center_frequency_mhz() const;
  /// Operating point with the largest analytic |slope|.
  double analytic_f_max_mhz() const;
  int field_sign() const;

  /// Acquisition settings for one calibration step.
  AcquisitionConfig scan_acquisition(double f_mw_mhz) const;
  std::vector<double> scan_frequencies(double center_mhz) const;
  std::vector<double> coarse_frequencies() const;

  /// Track-adjacent pixel on the probe row, unless configured.
  std::size_t probe_row() const;
  std::size_t probe_col() const;
  std::size_t probe_pixel() const { return probe_row() * camera_model.grid.cols + probe_col(); }

  /// Frame-averaged drive current (A) for every frame of an acquisition.
  std::vector<double> frame_drive(const AcquisitionConfig& acq) const;
};

/// Noise-free offsets from the camera's expectation at an off-resonance
/// frequency.
OffsetMap ideal_offsets(const LockinCamera& camera, const AcquisitionConfig& acq,
                        double offset_mw_mhz);

/// Slope map from the camera's noise-free expectation at `acq.mw_frequency_mhz`.
SlopeMap ideal_slope_map(const LockinCamera& camera, const AcquisitionConfig& acq,
                         const OffsetMap& offsets, int field_sign, unsigned workers = 1);

}  // namespace nvw
