#include "nvw/config.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <variant>

#include "io_util.hpp"
#include "nvw/errors.hpp"

namespace nvw {

namespace {

using C = ExperimentConfig;
using Member = std::variant<double C::*, std::uint64_t C::*, std::int64_t C::*, bool C::*,
                            std::string C::*, std::vector<QuietWindow> C::*,
                            std::vector<std::uint64_t> C::*>;

enum Flags : unsigned { kNone = 0, kAuto = 1, kInf = 2, kPath = 4 };

struct Key {
  const char* name;
  Member member;
  unsigned flags = kNone;
  std::vector<std::string> choices = {};
};

const std::vector<Key>& schema() {
  static const std::vector<Key> keys = {
      {"seed", &C::seed},
      {"name", &C::name},
      {"layout_file", &C::layout_file, kPath},
      {"track_axis", &C::track_axis, kNone, {"x", "y"}},
      {"track_width_um", &C::track_width_um},
      {"center_width_um", &C::center_width_um},
      {"center_extent_um", &C::center_extent_um},
      {"arm_length_um", &C::arm_length_um},
      {"standoff_um", &C::standoff_um},
      {"waveform", &C::waveform, kNone, {"square", "pulse_train", "fepsp", "sampled", "none"}},
      {"amplitude_ma", &C::amplitude_ma},
      {"square_frequency_hz", &C::square_frequency_hz},
      {"square_duty", &C::square_duty},
      {"pulse_fwd_ms", &C::pulse_fwd_ms},
      {"pulse_rev_ms", &C::pulse_rev_ms},
      {"pulse_period_ms", &C::pulse_period_ms},
      {"fepsp_artifact_width_ms", &C::fepsp_artifact_width_ms},
      {"fepsp_artifact_fraction", &C::fepsp_artifact_fraction},
      {"fepsp_tau_fast_ms", &C::fepsp_tau_fast_ms},
      {"fepsp_tau_slow_ms", &C::fepsp_tau_slow_ms},
      {"fepsp_onset_ms", &C::fepsp_onset_ms},
      {"waveform_file", &C::waveform_file, kPath},
      {"zero_field_splitting_mhz", &C::zero_field_splitting_mhz},
      {"gyro_hz_per_nt", &C::gyro_hz_per_nt},
      {"contrast", &C::contrast},
      {"linewidth_mhz", &C::linewidth_mhz},
      {"fm_deviation_mhz", &C::fm_deviation_mhz},
      {"sensing_axis", &C::sensing_axis},
      {"branch", &C::branch, kNone, {"lower", "upper"}},
      {"bias_x_mt", &C::bias_x_mt},
      {"bias_y_mt", &C::bias_y_mt},
      {"bias_z_mt", &C::bias_z_mt},
      {"rows", &C::rows},
      {"cols", &C::cols},
      {"pitch_um", &C::pitch_um},
      {"usable_rows", &C::usable_rows},
      {"usable_cols", &C::usable_cols},
      {"grid_x_um", &C::grid_x_um},
      {"grid_y_um", &C::grid_y_um},
      {"f0_scatter_mhz", &C::f0_scatter_mhz},
      {"illumination_ratio", &C::illumination_ratio},
      {"gain_codes", &C::gain_codes},
      {"gain_reference_photons", &C::gain_reference_photons},
      {"shot_noise", &C::shot_noise},
      {"fixed_pattern_noise_codes", &C::fixed_pattern_noise_codes},
      {"desync_enabled", &C::desync_enabled},
      {"desync_threshold_hz", &C::desync_threshold_hz},
      {"desync_rolloff_per_khz", &C::desync_rolloff_per_khz},
      {"fps_hz", &C::fps_hz},
      {"f_mod_hz", &C::f_mod_hz},
      {"frames", &C::frames},
      {"acquisitions", &C::acquisitions},
      {"photons_per_frame", &C::photons_per_frame},
      {"trigger_phase_rad", &C::trigger_phase_rad},
      {"samples_per_half_period", &C::samples_per_half_period},
      {"acquisition_gap_s", &C::acquisition_gap_s},
      {"mw_frequency_mhz", &C::mw_frequency_mhz, kAuto},
      {"coarse_start_mhz", &C::coarse_start_mhz},
      {"coarse_stop_mhz", &C::coarse_stop_mhz},
      {"coarse_step_mhz", &C::coarse_step_mhz},
      {"scan_center_mhz", &C::scan_center_mhz, kAuto},
      {"scan_half_width_mhz", &C::scan_half_width_mhz},
      {"scan_step_mhz", &C::scan_step_mhz},
      {"scan_frames", &C::scan_frames},
      {"scan_acquisitions", &C::scan_acquisitions},
      {"fit_points", &C::fit_points},
      {"offset_mw_mhz", &C::offset_mw_mhz},
      {"contrast_min", &C::contrast_min},
      {"contrast_max", &C::contrast_max},
      {"snr_threshold", &C::snr_threshold},
      {"analysis_start_ms", &C::analysis_start_ms},
      {"analysis_end_ms", &C::analysis_end_ms, kInf},
      {"quiet_windows_ms", &C::quiet_windows_ms},
      {"noise_checkpoints", &C::noise_checkpoints},
      {"probe_row", &C::probe_row},
      {"probe_col", &C::probe_col},
      {"trace_step_um", &C::trace_step_um},
      {"trace_offset_ut", &C::trace_offset_ut},
      {"trace_count", &C::trace_count},
      {"workers", &C::workers},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) {
    return {};
  }
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) {
    out.push_back(trim(part));
  }
  return out;
}

std::string format_real(double v) {
  if (std::isnan(v)) {
    return "auto";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  return detail::format_double(v);
}

struct Assign {
  const Key& key;
  const std::string& value;
  C& config;
  std::string where;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(where + ": " + key.name + ": " + what);
  }

  void operator()(double C::*m) const {
    double v = 0.0;
    if (value == "auto" && (key.flags & kAuto)) {
      v = std::numeric_limits<double>::quiet_NaN();
    } else if (value == "inf" && (key.flags & kInf)) {
      v = std::numeric_limits<double>::infinity();
    } else if (!parse_number(value, v) || !std::isfinite(v)) {
      fail("expected a finite number, got '" + value + "'");
    }
    config.*m = v;
  }
  void operator()(std::uint64_t C::*m) const {
    std::uint64_t v = 0;
    if (!parse_number(value, v)) {
      fail("expected a non-negative integer, got '" + value + "'");
    }
    config.*m = v;
  }
  void operator()(std::int64_t C::*m) const {
    std::int64_t v = 0;
    if (!parse_number(value, v)) {
      fail("expected an integer, got '" + value + "'");
    }
    config.*m = v;
  }
  void operator()(bool C::*m) const {
    if (value == "true") {
      config.*m = true;
    } else if (value == "false") {
      config.*m = false;
    } else {
      fail("expected true or false, got '" + value + "'");
    }
  }
  void operator()(std::string C::*m) const {
    if (!key.choices.empty()) {
      bool ok = false;
      for (const auto& c : key.choices) {
        ok = ok || c == value;
      }
      if (!ok) {
        std::string all;
        for (const auto& c : key.choices) {
          all += (all.empty() ? "" : ", ") + c;
        }
        fail("expected one of {" + all + "}, got '" + value + "'");
      }
    }
    config.*m = value;
  }
  void operator()(std::vector<QuietWindow> C::*m) const {
    std::vector<QuietWindow> out;
    if (!value.empty() && value != "none") {
      for (const std::string& item : split(value, ',')) {
        const auto dash = item.find('-', 1);
        QuietWindow w;
        if (dash == std::string::npos || !parse_number(trim(item.substr(0, dash)), w.start_ms) ||
            !parse_number(trim(item.substr(dash + 1)), w.end_ms)) {
          fail("expected windows like '5-10, 25-30', got '" + item + "'");
        }
        out.push_back(w);
      }
    }
    config.*m = std::move(out);
  }
  void operator()(std::vector<std::uint64_t> C::*m) const {
    std::vector<std::uint64_t> out;
    if (!value.empty() && value != "none") {
      for (const std::string& item : split(value, ',')) {
        std::uint64_t v = 0;
        if (!parse_number(item, v)) {
          fail("expected a comma-separated integer list, got '" + item + "'");
        }
        out.push_back(v);
      }
    }
    config.*m = std::move(out);
  }
};

struct Format {
  const C& config;

  std::string operator()(double C::*m) const { return format_real(config.*m); }
  std::string operator()(std::uint64_t C::*m) const { return std::to_string(config.*m); }
  std::string operator()(std::int64_t C::*m) const { return std::to_string(config.*m); }
  std::string operator()(bool C::*m) const { return config.*m ? "true" : "false"; }
  std::string operator()(std::string C::*m) const { return config.*m; }
  std::string operator()(std::vector<QuietWindow> C::*m) const {
    std::string out;
    for (const QuietWindow& w : config.*m) {
      out += (out.empty() ? "" : ", ") + detail::format_double(w.start_ms) + "-" +
             detail::format_double(w.end_ms);
    }
    return out.empty() ? "none" : out;
  }
  std::string operator()(std::vector<std::uint64_t> C::*m) const {
    std::string out;
    for (std::uint64_t v : config.*m) {
      out += (out.empty() ? "" : ", ") + std::to_string(v);
    }
    return out.empty() ? "none" : out;
  }
};

void require(bool ok, const std::string& what) {
  if (!ok) {
    throw ConfigError(what);
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  require(track_width_um > 0 && center_width_um > 0 && center_extent_um > 0 && arm_length_um > 0,
          "track dimensions must be positive");
  require(center_width_um <= track_width_um, "center_width_um exceeds track_width_um");
  require(standoff_um > 0, "standoff_um must be positive");
  require(square_frequency_hz > 0, "square_frequency_hz must be positive");
  require(square_duty > 0 && square_duty < 1, "square_duty must be in (0, 1)");
  require(pulse_fwd_ms > 0 && pulse_rev_ms >= 0 && pulse_period_ms > 0,
          "pulse timing must be positive");
  require(pulse_fwd_ms + pulse_rev_ms <= pulse_period_ms,
          "pulse widths exceed pulse_period_ms");
  require(fepsp_tau_slow_ms > fepsp_tau_fast_ms && fepsp_tau_fast_ms > 0,
          "fepsp decay constants must satisfy tau_slow > tau_fast > 0");
  require(fepsp_artifact_width_ms >= 0, "fepsp_artifact_width_ms must be non-negative");
  require(waveform != "sampled" || !waveform_file.empty(),
          "waveform = sampled needs waveform_file");
  require(contrast > 0 && contrast < 1, "contrast must be in (0, 1)");
  require(linewidth_mhz > 0, "linewidth_mhz must be positive");
  require(fm_deviation_mhz > 0, "fm_deviation_mhz must be positive");
  require(gyro_hz_per_nt > 0, "gyro_hz_per_nt must be positive");
  require(sensing_axis < 4, "sensing_axis must be 0..3");
  require(rows > 0 && cols > 0, "rows and cols must be positive");
  require(rows <= 4096 && cols <= 4096, "grid larger than 4096 pixels per side");
  require(pitch_um > 0, "pitch_um must be positive");
  require(usable_rows <= rows && usable_cols <= cols, "usable region exceeds the grid");
  require(f0_scatter_mhz >= 0, "f0_scatter_mhz must be non-negative");
  require(illumination_ratio >= 1, "illumination_ratio must be at least 1");
  require(gain_codes > 0, "gain_codes must be positive");
  require(gain_reference_photons >= 0, "gain_reference_photons must be non-negative");
  require(fps_hz > 0, "fps_hz must be positive");
  require(f_mod_hz >= 2 * fps_hz, "f_mod_hz must be at least twice fps_hz");
  require(frames > 0, "frames must be positive");
  require(acquisitions > 0, "acquisitions must be positive");
  require(photons_per_frame >= 0, "photons_per_frame must be non-negative");
  require(samples_per_half_period > 0, "samples_per_half_period must be positive");
  require(acquisition_gap_s >= 0, "acquisition_gap_s must be non-negative");
  require(coarse_step_mhz > 0 && coarse_stop_mhz > coarse_start_mhz,
          "coarse scan range is empty");
  require(scan_half_width_mhz > 0 && scan_step_mhz > 0, "scan range must be positive");
  require(scan_half_width_mhz / scan_step_mhz <= 5000, "fine scan has too many steps");
  require(scan_frames > 0 && scan_acquisitions > 0, "scan frames must be positive");
  require(fit_points >= 3, "fit_points must be at least 3");
  require(contrast_min < contrast_max, "contrast band is empty");
  require(snr_threshold >= 0, "snr_threshold must be non-negative");
  require(analysis_end_ms > analysis_start_ms, "analysis window is empty");
  for (const QuietWindow& w : quiet_windows_ms) {
    require(w.end_ms > w.start_ms, "quiet window must have positive length");
  }
  for (std::uint64_t n : noise_checkpoints) {
    require(n >= 1 && n <= acquisitions, "noise checkpoint outside 1..acquisitions");
  }
  require(trace_step_um > 0, "trace_step_um must be positive");
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  config.base_dir = base_dir;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Key* entry = nullptr;
    for (const Key& k : schema()) {
      if (key == k.name) {
        entry = &k;
      }
    }
    if (entry == nullptr) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError(where + ": duplicate key '" + key + "'");
    }
    std::visit(Assign{*entry, value, config, where}, entry->member);
  }
  if (seen.count("seed") == 0) {
    throw ConfigError("missing mandatory key 'seed'");
  }
  config.validate();
  return config;
}

ExperimentConfig read_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
  ExperimentConfig config = parse_config(text, base);
  for (const Key& k : schema()) {
    if (!(k.flags & kPath)) {
      continue;
    }
    const std::string& value = config.*std::get<std::string C::*>(k.member);
    if (!value.empty() && !std::filesystem::exists(config.resolve(value))) {
      throw ConfigError(std::string(k.name) + ": file not found: " +
                        config.resolve(value).string());
    }
  }
  return config;
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const Key& k : schema()) {
    out += k.name;
    out += " = ";
    out += std::visit(Format{config}, k.member);
    out += '\n';
  }
  return out;
}

bool operator==(const QuietWindow& a, const QuietWindow& b) {
  return a.start_ms == b.start_ms && a.end_ms == b.end_ms;
}

bool same_config(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace nvw
