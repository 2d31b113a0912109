#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "nvw/recon.hpp"

namespace nvw {

/// Declarative experiment description. Text form: one `key = value` per
/// line, `#` comments; the key suffix carries the unit (`_um`, `_mhz`, ...).
/// Unknown keys are rejected and `seed` is mandatory. Relative paths are
/// resolved against the config file's directory.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string name = "experiment";

  // circuit
  std::string layout_file;  // empty: built-in cross
  std::string track_axis = "y";
  double track_width_um = 10.0;
  double center_width_um = 5.0;
  double center_extent_um = 15.0;
  double arm_length_um = 450.0;
  double standoff_um = 10.0;

  // drive
  std::string waveform = "square";  // square | pulse_train | fepsp | sampled | none
  double amplitude_ma = 4.0;
  double square_frequency_hz = 130.0;
  double square_duty = 0.5;
  double pulse_fwd_ms = 1.0;
  double pulse_rev_ms = 1.0;
  double pulse_period_ms = 20.0;
  double fepsp_artifact_width_ms = 0.05;
  double fepsp_artifact_fraction = 0.5;
  double fepsp_tau_fast_ms = 1.0;
  double fepsp_tau_slow_ms = 5.0;
  double fepsp_onset_ms = 10.0;
  std::string waveform_file;  // sampled CSV

  // NV ensemble
  double zero_field_splitting_mhz = 2870.0;
  double gyro_hz_per_nt = 28.0;
  double contrast = 0.014;
  double linewidth_mhz = 0.5;
  double fm_deviation_mhz = 4.0;
  std::uint64_t sensing_axis = 0;
  std::string branch = "lower";
  double bias_x_mt = 1.0;
  double bias_y_mt = 0.5;
  double bias_z_mt = 4.0;

  // camera
  std::uint64_t rows = 64;
  std::uint64_t cols = 64;
  double pitch_um = 1.5;
  std::uint64_t usable_rows = 0;
  std::uint64_t usable_cols = 0;
  double grid_x_um = 0.0;
  double grid_y_um = 0.0;
  double f0_scatter_mhz = 0.1;
  double illumination_ratio = 1.0;
  double gain_codes = 12000.0;
  double gain_reference_photons = 0.0;
  bool shot_noise = true;
  double fixed_pattern_noise_codes = 0.0;
  bool desync_enabled = false;
  double desync_threshold_hz = 3000.0;
  double desync_rolloff_per_khz = 0.05;

  // acquisition
  double fps_hz = 650.0;
  double f_mod_hz = 2600.0;
  std::uint64_t frames = 500;
  std::uint64_t acquisitions = 1;
  double photons_per_frame = 1.66e6;
  double trigger_phase_rad = 0.0;
  std::uint64_t samples_per_half_period = 8;
  double acquisition_gap_s = 8.0;
  double mw_frequency_mhz = std::numeric_limits<double>::quiet_NaN();  // NaN: from calibration

  // calibration
  double coarse_start_mhz = 2700.0;
  double coarse_stop_mhz = 3100.0;
  double coarse_step_mhz = 0.5;
  double scan_center_mhz = std::numeric_limits<double>::quiet_NaN();  // NaN: analytic
  double scan_half_width_mhz = 2.0;
  double scan_step_mhz = 0.05;
  std::uint64_t scan_frames = 500;
  std::uint64_t scan_acquisitions = 1;
  std::uint64_t fit_points = 5;
  double offset_mw_mhz = 3100.0;
  double contrast_min = 0.012;
  double contrast_max = 0.016;

  // analysis
  double snr_threshold = 3.0;
  double analysis_start_ms = 20.0;
  double analysis_end_ms = std::numeric_limits<double>::infinity();
  std::vector<QuietWindow> quiet_windows_ms;
  std::vector<std::uint64_t> noise_checkpoints;
  std::int64_t probe_row = -1;  // -1: grid center row
  std::int64_t probe_col = -1;  // -1: column adjacent to the track
  double trace_step_um = 15.0;
  double trace_offset_ut = -20.0;
  std::uint64_t trace_count = 6;
  std::uint64_t workers = 0;  // 0: hardware concurrency

  /// Directory of the config file; relative paths resolve against it.
  std::filesystem::path base_dir;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  std::filesystem::path resolve(const std::string& path) const;
};

/// Throws ConfigError naming the line on syntax, unit or range errors.
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = {});
/// Also checks that referenced files exist.
ExperimentConfig read_config(const std::filesystem::path& path);
/// Canonical text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

bool operator==(const QuietWindow& a, const QuietWindow& b);
bool same_config(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace nvw
