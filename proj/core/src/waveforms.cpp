#include "nvw/waveforms.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "io_util.hpp"
#include "nvw/errors.hpp"

namespace nvw {

namespace {

double frac(double x) { return x - std::floor(x); }

bool finite_positive(double v) { return v > 0.0 && std::isfinite(v); }

}  // namespace

Waveform Waveform::square_wave(double frequency_hz, double amplitude_a, double duty) {
  if (!finite_positive(frequency_hz)) {
    throw ConfigError("square wave frequency must be positive");
  }
  if (!(duty > 0.0 && duty < 1.0)) {
    throw ConfigError("square wave duty must be in (0, 1)");
  }
  if (!std::isfinite(amplitude_a)) {
    throw ConfigError("waveform amplitude must be finite");
  }
  return Waveform(WaveformKind::square, amplitude_a, SquareParams{frequency_hz, duty});
}

Waveform Waveform::pulse_train(double fwd_ms, double rev_ms, double period_ms,
                               double amplitude_a) {
  if (!finite_positive(period_ms) || !(fwd_ms >= 0.0) || !(rev_ms >= 0.0)) {
    throw ConfigError("pulse widths must be non-negative and the period positive");
  }
  if (fwd_ms + rev_ms > period_ms) {
    throw ConfigError("pulse widths exceed the period");
  }
  if (!std::isfinite(amplitude_a)) {
    throw ConfigError("waveform amplitude must be finite");
  }
  return Waveform(WaveformKind::pulse_train, amplitude_a, PulseParams{fwd_ms, rev_ms, period_ms});
}

Waveform Waveform::fepsp(double amplitude_a, const FepspParams& params) {
  if (!(params.tau_fast_ms > 0.0) || !(params.tau_slow_ms > params.tau_fast_ms)) {
    throw ConfigError("fEPSP needs tau_slow > tau_fast > 0");
  }
  if (!(params.artifact_width_ms >= 0.0) || !(params.onset_ms >= 0.0)) {
    throw ConfigError("fEPSP artifact width and onset must be non-negative");
  }
  if (!std::isfinite(amplitude_a)) {
    throw ConfigError("waveform amplitude must be finite");
  }
  Waveform w(WaveformKind::fepsp, amplitude_a, params);
  const double tf = params.tau_fast_ms;
  const double ts = params.tau_slow_ms;
  const double t_peak = std::log(ts / tf) * ts * tf / (ts - tf);
  w.fepsp_norm_ = std::exp(-t_peak / ts) - std::exp(-t_peak / tf);
  return w;
}

Waveform Waveform::sampled(std::vector<double> values_a, double rate_hz) {
  if (values_a.empty()) {
    throw ConfigError("sampled waveform has no values");
  }
  if (!finite_positive(rate_hz)) {
    throw ConfigError("sampled waveform rate must be positive");
  }
  double peak = 0.0;
  for (double v : values_a) {
    if (!std::isfinite(v)) {
      throw ConfigError("sampled waveform contains a non-finite value");
    }
    peak = std::max(peak, std::abs(v));
  }
  return Waveform(WaveformKind::sampled, peak, SampledParams{std::move(values_a), rate_hz});
}

double Waveform::fepsp_sample(const FepspParams& p, double t_ms) const {
  const double t = t_ms - p.onset_ms;
  if (t < 0.0) {
    return 0.0;
  }
  const double w = p.artifact_width_ms;
  if (t < w) {
    const double lobe = p.artifact_fraction * amplitude_;
    return t < 0.5 * w ? lobe : -lobe;
  }
  const double tau = t - w;
  const double shape = std::exp(-tau / p.tau_slow_ms) - std::exp(-tau / p.tau_fast_ms);
  return -amplitude_ * shape / fepsp_norm_;
}

double Waveform::sample(double t_s) const {
  switch (kind_) {
    case WaveformKind::square: {
      const auto& p = std::get<SquareParams>(params_);
      return frac(t_s * p.frequency_hz) < p.duty ? amplitude_ : -amplitude_;
    }
    case WaveformKind::pulse_train: {
      const auto& p = std::get<PulseParams>(params_);
      const double t_ms = t_s * 1e3;
      const double ph = t_ms - std::floor(t_ms / p.period_ms) * p.period_ms;
      if (ph < p.fwd_ms) {
        return amplitude_;
      }
      if (ph < p.fwd_ms + p.rev_ms) {
        return -amplitude_;
      }
      return 0.0;
    }
    case WaveformKind::fepsp:
      return fepsp_sample(std::get<FepspParams>(params_), t_s * 1e3);
    case WaveformKind::sampled: {
      const auto& p = std::get<SampledParams>(params_);
      const double idx = std::floor(t_s * p.rate_hz);
      if (!(idx > 0.0)) {
        return p.values.front();
      }
      const double last = static_cast<double>(p.values.size() - 1);
      return p.values[static_cast<std::size_t>(std::min(idx, last))];
    }
  }
  return 0.0;
}

bool Waveform::is_constant() const {
  if (amplitude_ == 0.0) {
    return true;
  }
  if (const auto* p = sampled_params()) {
    return std::all_of(p->values.begin(), p->values.end(),
                       [&](double v) { return v == p->values.front(); });
  }
  return false;
}

std::string waveform_kind_name(WaveformKind kind) {
  switch (kind) {
    case WaveformKind::square:
      return "square";
    case WaveformKind::pulse_train:
      return "pulse_train";
    case WaveformKind::fepsp:
      return "fepsp";
    case WaveformKind::sampled:
      return "sampled";
  }
  return "unknown";
}

Waveform read_sampled_csv(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::size_t pos = 0;
  double rate = 0.0;
  std::vector<double> values;
  bool header = true;
  while (pos < text.size()) {
    const std::size_t line_start = pos;
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      nl = text.size();
    }
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const char* first = line.data();
    const char* last = line.data() + line.size();
    if (header) {
      const std::string prefix = "rate_hz=";
      if (line.compare(0, prefix.size(), prefix) != 0) {
        throw FormatError("sampled waveform CSV must start with 'rate_hz=<value>'", line_start);
      }
      first += prefix.size();
      auto [ptr, ec] = std::from_chars(first, last, rate);
      if (ec != std::errc() || ptr != last) {
        throw FormatError("bad rate in sampled waveform CSV", line_start);
      }
      header = false;
      continue;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      throw FormatError("bad current value in sampled waveform CSV", line_start);
    }
    values.push_back(v);
  }
  if (header) {
    throw FormatError("sampled waveform CSV is empty", 0);
  }
  return Waveform::sampled(std::move(values), rate);
}

void write_sampled_csv(const std::filesystem::path& path, const SampledParams& params) {
  std::string out = "rate_hz=" + detail::format_double(params.rate_hz) + "\n";
  for (double v : params.values) {
    out += detail::format_double(v);
    out += '\n';
  }
  detail::write_file_atomic(path, out);
}

}  // namespace nvw
