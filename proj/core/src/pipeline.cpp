#include "nvw/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "io_util.hpp"
#include "nvw/errors.hpp"
#include "nvw/experiment.hpp"
#include "nvw/formats.hpp"

namespace nvw {

namespace fs = std::filesystem;

namespace {

// Acquisition indices of the calibration stage, kept clear of the
// measurement acquisitions so noise streams never repeat.
constexpr std::uint64_t kOffsetAcquisitionBase = std::uint64_t{1} << 40;
constexpr std::uint64_t kScanAcquisitionBase = std::uint64_t{1} << 41;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

class Summary {
 public:
  void add(const std::string& key, double v) { text_ += key + " " + num(v) + "\n"; }
  void add(const std::string& key, const std::string& v) { text_ += key + " " + v + "\n"; }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

class Stage {
 public:
  Stage(std::string name, fs::path dir, const ExperimentConfig& config)
      : dir_(std::move(dir)) {
    manifest_.stage = std::move(name);
    manifest_.config_hash = sha256_hex(serialize_config(config));
    manifest_.tool_version = kToolVersion;
    manifest_.seed = config.seed;
    manifest_.started_utc = utc_timestamp();
    fs::create_directories(dir_);
    std::error_code ec;
    fs::remove(manifest_path(), ec);
  }

  const fs::path& dir() const { return dir_; }
  fs::path manifest_path() const { return dir_ / "manifest.json"; }

  fs::path file(const std::string& name) {
    outputs_.push_back(dir_ / name);
    return outputs_.back();
  }

  void finish() {
    for (const fs::path& p : outputs_) {
      manifest_.add_output(dir_, p);
    }
    manifest_.finished_utc = utc_timestamp();
    write_manifest(manifest_path(), manifest_);
  }

 private:
  fs::path dir_;
  RunManifest manifest_;
  std::vector<fs::path> outputs_;
};

std::vector<double> mean_over(const std::vector<std::vector<double>>& images) {
  std::vector<double> out(images.front().size(), 0.0);
  for (const auto& img : images) {
    for (std::size_t p = 0; p < out.size(); ++p) {
      out[p] += img[p];
    }
  }
  for (double& v : out) {
    v /= static_cast<double>(images.size());
  }
  return out;
}

double masked_mean(const std::vector<double>& v, const std::vector<unsigned char>& mask) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < v.size(); ++p) {
    if (mask[p] && std::isfinite(v[p])) {
      s += v[p];
      ++n;
    }
  }
  return n > 0 ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

// Mean pv image over `count` acquisitions of a static scene.
std::vector<double> static_pv_image(const LockinCamera& camera, const AcquisitionConfig& acq,
                                    std::uint64_t first_acquisition, std::size_t count,
                                    unsigned workers) {
  const PreparedScene prep = camera.prepare(Scene::zero(camera.pixels()), acq, workers);
  std::vector<std::vector<double>> images;
  for (std::size_t a = 0; a < count; ++a) {
    images.push_back(mean_pv_image(camera.synthesize(prep, first_acquisition + a, workers)));
  }
  return mean_over(images);
}

std::vector<fs::path> list_stacks(const fs::path& dir) {
  std::vector<fs::path> out;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".nvwstack") {
        out.push_back(e.path());
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void check_stack(const FrameStack& s, const ExperimentConfig& c, const fs::path& path) {
  const std::string where = path.filename().string() + ": ";
  if (s.rows != c.rows || s.cols != c.cols) {
    throw MismatchError(where + "stack is " + std::to_string(s.rows) + "x" +
                        std::to_string(s.cols) + " but the config grid is " +
                        std::to_string(c.rows) + "x" + std::to_string(c.cols));
  }
  if (s.frames != c.frames) {
    throw MismatchError(where + "stack has " + std::to_string(s.frames) +
                        " frames, config expects " + std::to_string(c.frames));
  }
  if (s.fps != c.fps_hz || s.f_mod_hz != c.f_mod_hz) {
    throw MismatchError(where + "stack timing differs from the config");
  }
}

void check_calibration(const SlopeMap& slopes, const OffsetMap& offsets,
                       const ExperimentConfig& c) {
  if (slopes.rows != c.rows || slopes.cols != c.cols || offsets.rows != c.rows ||
      offsets.cols != c.cols) {
    throw MismatchError("calibration files do not match the config grid");
  }
}

FieldMap blank_map(const ExperimentSetup& setup) {
  FieldMap m;
  m.rows = setup.config.rows;
  m.cols = setup.config.cols;
  m.pitch_um = setup.config.pitch_um;
  m.standoff_um = setup.config.standoff_um;
  m.values.assign(m.rows * m.cols, std::numeric_limits<double>::quiet_NaN());
  return m;
}

std::vector<unsigned char> valid_usable(const FieldSeries& series,
                                        const std::vector<unsigned char>& usable) {
  std::vector<unsigned char> out(series.pixels());
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = series.valid[p] && usable[p] ? 1 : 0;
  }
  return out;
}

void write_masked_maps(Stage& stage, const std::string& stem, const SnrMaskedMap& m) {
  write_field_map(stage.file(stem + "_signal.nvwmap"), m.signal);
  write_field_map(stage.file(stem + "_noise.nvwmap"), m.noise);
  write_field_map(stage.file(stem + "_masked.nvwmap"), m.masked);
}

std::vector<unsigned char> combine(const std::vector<unsigned char>& a,
                                   const std::vector<unsigned char>& b) {
  std::vector<unsigned char> out(a.size());
  for (std::size_t p = 0; p < a.size(); ++p) {
    out[p] = a[p] && b[p] ? 1 : 0;
  }
  return out;
}

void analyze_square(const ExperimentSetup& setup, const FieldSeries& series,
                    const std::vector<unsigned char>& mask, Stage& stage, Summary& summary) {
  const double f = setup.waveform->square_params()->frequency_hz;
  FieldMap signal = blank_map(setup);
  FieldMap noise = blank_map(setup);
  const double res = series.fps / static_cast<double>(series.frames);
  const auto fund = static_cast<std::size_t>(std::lround(f / res));
  for (std::size_t p = 0; p < series.pixels(); ++p) {
    if (!series.valid[p]) {
      continue;
    }
    const AmplitudeSpectrum s = spectrum(series.pixel(p), series.fps);
    signal.values[p] = s.at(f);
    // noise floor: mean amplitude away from DC and the drive harmonics
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 1; k < s.amplitude.size(); ++k) {
      const std::size_t r = fund > 0 ? k % fund : 1;
      if (fund > 0 && (r <= 1 || r + 1 >= fund)) {
        continue;
      }
      sum += s.amplitude[k];
      ++n;
    }
    noise.values[p] = n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
  const SnrMaskedMap masked = snr_mask(signal, noise, setup.config.snr_threshold);
  write_masked_maps(stage, "ac", masked);
  const std::size_t probe = setup.probe_pixel();
  summary.add("ac_frequency_hz", f);
  summary.add("ac_probe_amplitude_uT", signal.values[probe]);
  summary.add("ac_probe_forward_uT",
              setup.per_amp.values[probe] * setup.config.amplitude_ma * 1e-3);
  summary.add("ac_masked_pixels", static_cast<double>(masked.included));
  write_spectrum_csv(stage.file("spectrum_masked_mean.csv"),
                     average_spectrum(series, combine(mask, masked.mask)));
}

void analyze_pulses(const ExperimentSetup& setup, const FieldSeries& series, Stage& stage,
                    Summary& summary) {
  const PulseParams* pp = setup.waveform->pulse_params();
  PulseWindow window;
  window.period_ms = pp->period_ms;
  window.fwd_ms = pp->fwd_ms;
  window.rev_ms = pp->rev_ms;
  window.analysis_start_ms = setup.config.analysis_start_ms;
  window.analysis_end_ms = setup.config.analysis_end_ms;
  const PulseMaps maps =
      pulse_maps(series, window, setup.config.pitch_um, setup.config.standoff_um);
  const SnrMaskedMap masked = snr_mask(maps.signal, maps.noise, setup.config.snr_threshold);
  write_masked_maps(stage, "pulse", masked);
  const std::vector<double> trace = series.masked_mean(masked.mask);
  write_timeseries_csv(stage.file("masked_mean_timeseries.csv"), trace, series.fps, series.t0_s);

  const std::size_t probe = setup.probe_pixel();
  const PulseMetrics m = pulse_metrics(series.pixel(probe), series.fps, window);
  summary.add("pulse_count", static_cast<double>(m.pulses));
  summary.add("pulse_probe_amplitude_uT", m.amplitude_ut);
  summary.add("pulse_probe_noise_uT", m.noise_ut);
  summary.add("pulse_probe_snr", m.snr);
  summary.add("pulse_probe_forward_uT",
              setup.per_amp.values[probe] * setup.config.amplitude_ma * 1e-3);
  summary.add("pulse_masked_pixels", static_cast<double>(masked.included));
}

void analyze_template(const ExperimentSetup& setup, const FieldSeries& series, Stage& stage,
                      Summary& summary) {
  AcquisitionConfig acq = setup.acquisition;
  const std::vector<double> drive = setup.frame_drive(acq);
  const double wm = mean(drive);
  double sww = 0.0;
  double peak = 0.0;
  for (double w : drive) {
    sww += (w - wm) * (w - wm);
    peak = std::max(peak, std::abs(w));
  }
  if (!(sww > 0.0)) {
    throw InvalidArgument("drive waveform is constant over the acquisition");
  }
  FieldMap signal = blank_map(setup);
  FieldMap noise = blank_map(setup);
  const std::size_t nf = drive.size();
  for (std::size_t p = 0; p < series.pixels(); ++p) {
    if (!series.valid[p]) {
      continue;
    }
    const auto v = series.pixel(p);
    const double vm = mean(v);
    double svw = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      svw += (v[f] - vm) * (drive[f] - wm);
    }
    const double a = svw / sww;  // uT per A
    double ss = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      const double r = v[f] - vm - a * (drive[f] - wm);
      ss += r * r;
    }
    const double se = std::sqrt(ss / static_cast<double>(nf - 2) / sww);
    signal.values[p] = a * peak;
    noise.values[p] = se * peak;
  }
  const SnrMaskedMap masked = snr_mask(signal, noise, setup.config.snr_threshold);
  write_masked_maps(stage, "template", masked);
  const std::vector<double> trace = series.masked_mean(masked.mask);
  write_timeseries_csv(stage.file("masked_mean_timeseries.csv"), trace, series.fps, series.t0_s);
  double r = std::numeric_limits<double>::quiet_NaN();
  if (masked.included > 0) {
    r = pearson(trace, drive);
  }
  summary.add("template_masked_pixels", static_cast<double>(masked.included));
  summary.add("template_pearson_r", r);

  // traces stepping away from the track, each offset by trace_offset_ut
  const ExperimentConfig& c = setup.config;
  const std::size_t row = setup.probe_row();
  const std::size_t col0 = setup.probe_col();
  const std::size_t track = setup.camera_model.grid.column_at(c.grid_x_um);
  const long dir = col0 >= track ? 1 : -1;
  const long step = std::max(1L, std::lround(c.trace_step_um / c.pitch_um));
  std::vector<std::size_t> cols;
  for (std::size_t k = 0; k < c.trace_count; ++k) {
    const long col = static_cast<long>(col0) + dir * step * static_cast<long>(k);
    if (col < 0 || col >= static_cast<long>(c.cols)) {
      break;
    }
    cols.push_back(static_cast<std::size_t>(col));
  }
  std::string csv = "t_s";
  for (std::size_t k = 0; k < cols.size(); ++k) {
    csv += ",col" + std::to_string(cols[k]) + "_uT";
  }
  csv += "\n";
  for (std::size_t f = 0; f < series.frames; ++f) {
    csv += num(series.t0_s + static_cast<double>(f) / series.fps);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double v = series.pixel(row * c.cols + cols[k])[f];
      csv += "," + num(v + c.trace_offset_ut * static_cast<double>(k));
    }
    csv += "\n";
  }
  detail::write_file_atomic(stage.file("trace_stack.csv"), csv);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CalibrationFailed*>(&e) != nullptr) {
    return kExitCalibrationFailed;
  }
  if (dynamic_cast<const MismatchError*>(&e) != nullptr) {
    return kExitMismatch;
  }
  return kExitError;
}

void cmd_calibrate(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const ExperimentSetup setup = ExperimentSetup::from_config(config);
  const LockinCamera camera = setup.camera();
  const StagePaths paths{out};
  Stage stage("calibrate", paths.calibration(), config);
  const std::vector<unsigned char> usable = setup.camera_model.grid.usable_mask();
  const unsigned workers = setup.workers;

  // coarse sweep: image-mean fluorescence, no lock-in
  const std::vector<double> coarse = setup.coarse_frequencies();
  auto mean_intensity = [&](double f) {
    return masked_mean(camera.intensity_image(f, config.photons_per_frame), usable);
  };
  std::vector<double> coarse_i(coarse.size());
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    coarse_i[k] = mean_intensity(coarse[k]);
  }
  const double far = *std::max_element(coarse_i.begin(), coarse_i.end());
  // the sensing dip: the local minimum nearest the analytic sensing resonance
  const double f_expect = setup.center_frequency_mhz();
  std::size_t dip = 0;
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    const bool local = (k == 0 || coarse_i[k] <= coarse_i[k - 1]) &&
                       (k + 1 == coarse.size() || coarse_i[k] <= coarse_i[k + 1]);
    if (local && (std::abs(coarse[k] - f_expect) < std::abs(coarse[dip] - f_expect) ||
                  dip == 0)) {
      dip = k;
    }
  }
  double f_dip = coarse[dip];
  double i_dip = coarse_i[dip];
  const double fine = config.coarse_step_mhz / 50.0;
  for (int j = -50; j <= 50; ++j) {
    const double f = coarse[dip] + j * fine;
    const double v = mean_intensity(f);
    if (v < i_dip) {
      i_dip = v;
      f_dip = f;
    }
  }
  const double contrast = far > 0.0 ? 1.0 - i_dip / far : 0.0;
  {
    std::string csv = "f_mhz,mean_intensity\n";
    for (std::size_t k = 0; k < coarse.size(); ++k) {
      csv += num(coarse[k]) + "," + num(far > 0.0 ? coarse_i[k] / far : 0.0) + "\n";
    }
    detail::write_file_atomic(stage.file("odmr_coarse.csv"), csv);
  }

  // offset reference: off resonance, circuit grounded
  const AcquisitionConfig off_acq = setup.scan_acquisition(config.offset_mw_mhz);
  OffsetMap offsets;
  offsets.rows = config.rows;
  offsets.cols = config.cols;
  offsets.pv = static_pv_image(camera, off_acq, kOffsetAcquisitionBase, config.scan_acquisitions,
                               workers);

  const double center = std::isfinite(config.scan_center_mhz)
                            ? config.scan_center_mhz
                            : f_dip + max_slope_detunings(setup.nv).front();
  const std::vector<double> scan = setup.scan_frequencies(center);
  std::vector<std::vector<double>> images;
  images.reserve(scan.size());
  for (std::size_t k = 0; k < scan.size(); ++k) {
    images.push_back(static_pv_image(camera, setup.scan_acquisition(scan[k]),
                                     kScanAcquisitionBase + k * config.scan_acquisitions,
                                     config.scan_acquisitions, workers));
  }

  CalibrationOptions options;
  options.fit_points = config.fit_points;
  options.expected_center_mhz = f_dip;
  options.usable = usable;
  options.field_sign = setup.field_sign();
  options.workers = workers;
  const CalibrationResult result =
      calibrate(scan, images, config.rows, config.cols, offsets, setup.nv, options);

  write_slope_map(stage.file("slopes.nvwslope"), result.slopes);
  write_offset_map(stage.file("offsets.nvwoffset"), offsets);
  write_odmr_csv(stage.file("odmr_fine.csv"), result.curve);

  std::size_t dead = 0;
  for (std::size_t p = 0; p < result.slopes.pixels(); ++p) {
    dead += usable[p] && result.slopes.is_dead(p) ? 1 : 0;
  }
  std::vector<double> used;
  for (std::size_t p = 0; p < result.slopes.pixels(); ++p) {
    if (usable[p] && !result.slopes.is_dead(p)) {
      used.push_back(result.slopes.slope[p]);
    }
  }
  const bool in_band = contrast >= config.contrast_min && contrast <= config.contrast_max;
  Summary summary;
  summary.add("sensing_resonance_mhz", f_dip);
  summary.add("scan_start_mhz", scan.front());
  summary.add("scan_stop_mhz", scan.back());
  summary.add("f_max_mhz", result.slopes.f_max_mhz);
  summary.add("image_mean_contrast", contrast);
  summary.add("contrast_in_band", in_band ? "yes" : "no");
  summary.add("median_slope_codes_per_mhz", quantile(used, 0.5));
  summary.add("dead_pixels", static_cast<double>(dead));
  summary.add("field_sign", static_cast<double>(result.slopes.field_sign));
  detail::write_file_atomic(stage.file("summary.txt"), summary.text());
  stage.finish();

  log << "sensing resonance " << num(f_dip) << " MHz\n";
  log << "f_max " << num(result.slopes.f_max_mhz) << " MHz (scan " << num(scan.front()) << "-"
      << num(scan.back()) << " MHz)\n";
  log << "image-mean contrast " << num(100.0 * contrast) << " % ("
      << (in_band ? "inside" : "outside") << " configured " << num(100.0 * config.contrast_min)
      << "-" << num(100.0 * config.contrast_max) << " %)\n";
  log << "dead pixels " << dead << "\n";
}

void cmd_simulate(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const ExperimentSetup setup = ExperimentSetup::from_config(config);
  const LockinCamera camera = setup.camera();
  const StagePaths paths{out};
  AcquisitionConfig acq = setup.acquisition;
  if (!std::isfinite(acq.mw_frequency_mhz)) {
    if (fs::exists(paths.slopes())) {
      acq.mw_frequency_mhz = read_slope_map(paths.slopes()).f_max_mhz;
      log << "microwave frequency from calibration: " << num(acq.mw_frequency_mhz) << " MHz\n";
    } else {
      acq.mw_frequency_mhz = setup.analytic_f_max_mhz();
      log << "no calibration found; analytic operating point " << num(acq.mw_frequency_mhz)
          << " MHz\n";
    }
  }
  for (const fs::path& old : list_stacks(paths.stacks())) {
    fs::remove(old);
  }
  Stage stage("simulate", paths.stacks(), config);
  const PreparedScene prep = camera.prepare(setup.scene(), acq, setup.workers);
  for (std::size_t k = 0; k < acq.n_acquisitions; ++k) {
    FrameStack stack = camera.synthesize(prep, k, setup.workers);
    stack.t0_s = acq.acquisition_start_s(k);
    char name[32];
    std::snprintf(name, sizeof name, "acq_%05zu.nvwstack", k);
    write_frame_stack(stage.file(name), stack);
  }
  stage.finish();
  log << "wrote " << acq.n_acquisitions << " stacks of " << acq.frames_per_acq << " frames at "
      << num(acq.fps) << " fps (" << num(1e3 * acq.duration_s()) << " ms each)\n";
}

void cmd_analyze(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const ExperimentSetup setup = ExperimentSetup::from_config(config);
  const StagePaths paths{out};
  const std::vector<fs::path> files = list_stacks(paths.stacks());
  if (files.empty()) {
    throw MismatchError("no stacks found in " + paths.stacks().string());
  }
  if (!fs::exists(paths.slopes()) || !fs::exists(paths.offsets())) {
    throw Error("missing calibration in " + paths.calibration().string() +
                "; run calibrate first");
  }
  const SlopeMap slopes = read_slope_map(paths.slopes());
  const OffsetMap offsets = read_offset_map(paths.offsets());
  check_calibration(slopes, offsets, config);
  const std::vector<unsigned char> usable = setup.camera_model.grid.usable_mask();

  if (!config.quiet_windows_ms.empty() && setup.waveform && setup.waveform->pulse_params()) {
    check_quiet_windows(config.quiet_windows_ms, *setup.waveform->pulse_params());
  }
  std::optional<NoiseTracker> tracker;
  PvAccumulator plain;
  if (!config.quiet_windows_ms.empty()) {
    std::vector<std::size_t> checkpoints(config.noise_checkpoints.begin(),
                                         config.noise_checkpoints.end());
    tracker.emplace(slopes, offsets, setup.nv, config.quiet_windows_ms, checkpoints, usable);
  }
  for (const fs::path& f : files) {
    const FrameStack stack = read_frame_stack(f);
    check_stack(stack, config, f);
    if (tracker) {
      tracker->add(stack, setup.workers);
    } else {
      plain.add(stack, setup.workers);
    }
  }
  const PvAccumulator& acc = tracker ? tracker->accumulator() : plain;
  const FieldSeries series = to_field(acc, slopes, &offsets, setup.nv, setup.workers);
  const std::vector<unsigned char> mask = valid_usable(series, usable);

  Stage stage("analyze", paths.analysis(), config);
  Summary summary;
  summary.add("acquisitions", static_cast<double>(acc.count()));
  summary.add("probe_row", static_cast<double>(setup.probe_row()));
  summary.add("probe_col", static_cast<double>(setup.probe_col()));

  write_field_map(stage.file("field_mean.nvwmap"),
                  series.frame_mean(config.pitch_um, config.standoff_um));
  const PixelTimeseries probe = series.extract(setup.probe_row(), setup.probe_col());
  write_timeseries_csv(stage.file("probe_timeseries.csv"), probe.values_ut, probe.fps, probe.t0_s);
  write_spectrum_csv(stage.file("probe_spectrum.csv"), spectrum(probe));
  write_spectrum_csv(stage.file("spectrum_mean.csv"), average_spectrum(series, mask));

  if (setup.waveform) {
    switch (setup.waveform->kind()) {
      case WaveformKind::square:
        analyze_square(setup, series, mask, stage, summary);
        break;
      case WaveformKind::pulse_train:
        analyze_pulses(setup, series, stage, summary);
        break;
      case WaveformKind::fepsp:
      case WaveformKind::sampled:
        analyze_template(setup, series, stage, summary);
        break;
    }
  }

  if (tracker) {
    const NoiseStats stats = tracker->result();
    write_noise_csv(stage.file("noise.csv"), stats);
    write_histogram_csv(stage.file("noise_histogram.csv"), stats.histogram);
    summary.add("noise_std_uT", stats.std_ut.empty() ? 0.0 : stats.std_ut.back());
    summary.add("noise_mode_uT", stats.mode_ut);
    summary.add("noise_skewness", stats.skewness);
    summary.add("noise_modes", static_cast<double>(stats.modes));
    summary.add("sensitivity_nT_per_rtHz", stats.sensitivity_nt_rthz);
  }
  detail::write_file_atomic(stage.file("summary.txt"), summary.text());
  stage.finish();
  log << summary.text();
}

void cmd_render(const fs::path& map_file, const fs::path& out_dir, std::ostream& log) {
  const FieldMap map = read_field_map(map_file);
  const std::string stem = map_file.stem().string();
  fs::create_directories(out_dir);
  RunManifest manifest;
  manifest.stage = "render";
  manifest.config_hash = sha256_file(map_file);
  manifest.tool_version = kToolVersion;
  manifest.started_utc = utc_timestamp();
  const fs::path manifest_path = out_dir / (stem + ".manifest.json");
  std::error_code ec;
  fs::remove(manifest_path, ec);
  const fs::path pgm = out_dir / (stem + ".pgm");
  const fs::path bar = out_dir / (stem + ".colorbar.txt");
  detail::write_file_atomic(pgm, render_pgm(map));
  detail::write_file_atomic(bar, render_colorbar(map));
  manifest.add_output(out_dir, pgm);
  manifest.add_output(out_dir, bar);
  manifest.finished_utc = utc_timestamp();
  write_manifest(manifest_path, manifest);
  log << "rendered " << map.rows << "x" << map.cols << " map to " << pgm.string() << "\n";
}

int run_stage(const std::string& stage, const fs::path& config_path,
              std::optional<std::uint64_t> seed, const fs::path& out, const fs::path& map_file,
              std::ostream& log, std::ostream& err) {
  try {
    if (stage == "render") {
      if (map_file.empty()) {
        throw ConfigError("render needs --map");
      }
      cmd_render(map_file, out.empty() ? map_file.parent_path() / "render" : out, log);
      return kExitOk;
    }
    ExperimentConfig config = read_config(config_path);
    if (seed) {
      config.seed = *seed;
    }
    const fs::path dir = out.empty() ? fs::path("runs") / config.name : out;
    if (stage == "calibrate") {
      cmd_calibrate(config, dir, log);
    } else if (stage == "simulate") {
      cmd_simulate(config, dir, log);
    } else if (stage == "analyze") {
      cmd_analyze(config, dir, log);
    } else {
      throw ConfigError("unknown command '" + stage + "'");
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace nvw
