#include "nvw/experiment.hpp"

#include <cmath>

#include "nvw/errors.hpp"
#include "nvw/parallel.hpp"

namespace nvw {

ExperimentSetup ExperimentSetup::from_config(const ExperimentConfig& config) {
  config.validate();
  ExperimentSetup s;
  s.config = config;
  s.workers = resolve_workers(static_cast<unsigned>(config.workers));

  if (config.layout_file.empty()) {
    s.layout = make_cross_layout(config.track_width_um, config.center_width_um,
                                 config.center_extent_um, config.arm_length_um,
                                 config.track_axis == "x" ? TrackAxis::x : TrackAxis::y);
  } else {
    s.layout = read_layout(config.resolve(config.layout_file));
  }

  s.nv.zero_field_splitting_mhz = config.zero_field_splitting_mhz;
  s.nv.gyro_hz_per_nt = config.gyro_hz_per_nt;
  s.nv.contrast = config.contrast;
  s.nv.linewidth_mhz = config.linewidth_mhz;
  s.nv.fm_deviation_mhz = config.fm_deviation_mhz;
  s.nv.sensing_axis = static_cast<std::size_t>(config.sensing_axis);
  s.nv.branch = config.branch == "upper" ? Branch::upper : Branch::lower;
  s.nv.validate();

  CameraModel& cam = s.camera_model;
  cam.grid.rows = config.rows;
  cam.grid.cols = config.cols;
  cam.grid.pitch_um = config.pitch_um;
  cam.grid.origin_um = {config.grid_x_um, config.grid_y_um, 0.0};
  cam.grid.usable_rows = config.usable_rows;
  cam.grid.usable_cols = config.usable_cols;
  cam.bias_t = Vec3{config.bias_x_mt, config.bias_y_mt, config.bias_z_mt} * 1e-3;
  cam.f0_scatter_mhz = config.f0_scatter_mhz;
  cam.illumination_ratio = config.illumination_ratio;
  cam.gain_codes = config.gain_codes;
  cam.gain_reference_photons = config.gain_reference_photons;
  cam.shot_noise = config.shot_noise;
  cam.fixed_pattern_noise_codes = config.fixed_pattern_noise_codes;
  cam.desync.enabled = config.desync_enabled;
  cam.desync.threshold_hz = config.desync_threshold_hz;
  cam.desync.rolloff_per_khz = config.desync_rolloff_per_khz;
  cam.seed = config.seed;
  cam.validate();

  AcquisitionConfig& acq = s.acquisition;
  acq.fps = config.fps_hz;
  acq.f_mod_hz = config.f_mod_hz;
  acq.frames_per_acq = config.frames;
  acq.n_acquisitions = config.acquisitions;
  acq.photons_per_pixel_per_frame = config.photons_per_frame;
  acq.trigger_phase_rad = config.trigger_phase_rad;
  acq.seed = config.seed;
  acq.samples_per_half_period = config.samples_per_half_period;
  acq.acquisition_gap_s = config.acquisition_gap_s;
  acq.mw_frequency_mhz = config.mw_frequency_mhz;
  {
    AcquisitionConfig check = acq;
    check.mw_frequency_mhz = config.zero_field_splitting_mhz;
    check.validate();
  }

  const double amp = config.amplitude_ma * 1e-3;
  if (config.waveform == "square") {
    s.waveform = Waveform::square_wave(config.square_frequency_hz, amp, config.square_duty);
  } else if (config.waveform == "pulse_train") {
    s.waveform =
        Waveform::pulse_train(config.pulse_fwd_ms, config.pulse_rev_ms, config.pulse_period_ms, amp);
  } else if (config.waveform == "fepsp") {
    FepspParams p;
    p.artifact_width_ms = config.fepsp_artifact_width_ms;
    p.artifact_fraction = config.fepsp_artifact_fraction;
    p.tau_fast_ms = config.fepsp_tau_fast_ms;
    p.tau_slow_ms = config.fepsp_tau_slow_ms;
    p.onset_ms = config.fepsp_onset_ms;
    s.waveform = Waveform::fepsp(amp, p);
  } else if (config.waveform == "sampled") {
    s.waveform = read_sampled_csv(config.resolve(config.waveform_file));
  }

  s.per_amp = field_map(s.layout, 1.0, cam.grid, config.standoff_um, s.nv.axis(), s.workers);
  return s;
}

Scene ExperimentSetup::scene() const {
  if (!waveform) {
    return Scene::zero(camera_model.grid.size());
  }
  return Scene::from_waveform(per_amp, *waveform);
}

double ExperimentSetup::center_frequency_mhz() const {
  return sensing_resonance(camera_model.bias_t, nv);
}

double ExperimentSetup::analytic_f_max_mhz() const {
  return center_frequency_mhz() + max_slope_detunings(nv).front();
}

int ExperimentSetup::field_sign() const { return nvw::field_sign(nv, camera_model.bias_t); }

AcquisitionConfig ExperimentSetup::scan_acquisition(double f_mw_mhz) const {
  AcquisitionConfig acq = acquisition;
  acq.frames_per_acq = config.scan_frames;
  acq.n_acquisitions = config.scan_acquisitions;
  acq.mw_frequency_mhz = f_mw_mhz;
  return acq;
}

std::vector<double> ExperimentSetup::scan_frequencies(double center_mhz) const {
  const auto half = static_cast<long>(std::lround(config.scan_half_width_mhz / config.scan_step_mhz));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * half + 1));
  for (long k = -half; k <= half; ++k) {
    out.push_back(center_mhz + static_cast<double>(k) * config.scan_step_mhz);
  }
  return out;
}

std::vector<double> ExperimentSetup::coarse_frequencies() const {
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(
      std::floor((config.coarse_stop_mhz - config.coarse_start_mhz) / config.coarse_step_mhz + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) {
    out.push_back(config.coarse_start_mhz + static_cast<double>(k) * config.coarse_step_mhz);
  }
  return out;
}

std::size_t ExperimentSetup::probe_row() const {
  const std::size_t rows = camera_model.grid.rows;
  if (config.probe_row >= 0) {
    if (static_cast<std::size_t>(config.probe_row) >= rows) {
      throw ConfigError("probe_row outside the grid");
    }
    return static_cast<std::size_t>(config.probe_row);
  }
  return rows / 2;
}

std::size_t ExperimentSetup::probe_col() const {
  const std::size_t cols = camera_model.grid.cols;
  if (config.probe_col >= 0) {
    if (static_cast<std::size_t>(config.probe_col) >= cols) {
      throw ConfigError("probe_col outside the grid");
    }
    return static_cast<std::size_t>(config.probe_col);
  }
  const std::size_t r = probe_row();
  std::size_t best = 0;
  for (std::size_t c = 1; c < cols; ++c) {
    if (std::abs(per_amp.at(r, c)) > std::abs(per_amp.at(r, best))) {
      best = c;
    }
  }
  return best;
}

std::vector<double> ExperimentSetup::frame_drive(const AcquisitionConfig& acq) const {
  std::vector<double> out(acq.frames_per_acq, 0.0);
  if (!waveform) {
    return out;
  }
  const std::size_t n = acq.samples_per_frame();
  const double dt = 1.0 / (2.0 * static_cast<double>(acq.samples_per_half_period) * acq.f_mod_hz);
  for (std::size_t f = 0; f < acq.frames_per_acq; ++f) {
    const double t_f = static_cast<double>(f) / acq.fps;
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sum += waveform->sample(t_f + (static_cast<double>(j) + 0.5) * dt);
    }
    out[f] = sum / static_cast<double>(n);
  }
  return out;
}

OffsetMap ideal_offsets(const LockinCamera& camera, const AcquisitionConfig& acq,
                        double offset_mw_mhz) {
  AcquisitionConfig off = acq;
  off.mw_frequency_mhz = offset_mw_mhz;
  OffsetMap m;
  m.rows = camera.model().grid.rows;
  m.cols = camera.model().grid.cols;
  m.pv.resize(camera.pixels());
  for (std::size_t p = 0; p < camera.pixels(); ++p) {
    const auto [i, q] = camera.expected_iq(p, off);
    m.pv[p] = pv_amplitude(i, q);
  }
  return m;
}

SlopeMap ideal_slope_map(const LockinCamera& camera, const AcquisitionConfig& acq,
                         const OffsetMap& offsets, int field_sign, unsigned workers) {
  const std::size_t n = camera.pixels();
  if (offsets.pv.size() != n) {
    throw MismatchError("offset reference does not match the camera");
  }
  SlopeMap m;
  m.rows = camera.model().grid.rows;
  m.cols = camera.model().grid.cols;
  m.f_max_mhz = acq.mw_frequency_mhz;
  m.field_sign = field_sign;
  m.slope.resize(n);
  m.f0_mhz.resize(n);
  m.operating_pv.resize(n);
  m.dead.assign(n, 0);
  parallel_for(n, workers, [&](std::size_t p0, std::size_t p1) {
    for (std::size_t p = p0; p < p1; ++p) {
      m.slope[p] = camera.expected_slope_codes(p, acq);
      m.f0_mhz[p] = camera.resonance_mhz(p, 0.0);
      const auto [i, q] = camera.expected_iq(p, acq);
      m.operating_pv[p] = pv_amplitude(i, q) - offsets.pv[p];
    }
  });
  m.slope_floor = slope_floor(m.slope);
  for (std::size_t p = 0; p < n; ++p) {
    m.dead[p] = std::abs(m.slope[p]) > m.slope_floor ? 0 : 1;
  }
  return m;
}

}  // namespace nvw
