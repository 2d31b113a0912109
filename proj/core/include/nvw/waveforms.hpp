#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace nvw {

enum class WaveformKind { square, pulse_train, fepsp, sampled };

struct SquareParams {
  double frequency_hz = 130.0;
  double duty = 0.5;  // fraction of the period at +A
};

struct PulseParams {
  double fwd_ms = 1.0;
  double rev_ms = 1.0;
  double period_ms = 20.0;
};

struct FepspParams {
  double artifact_width_ms = 0.05;
  double artifact_fraction = 0.5;  // artifact lobe height relative to the amplitude
  double tau_fast_ms = 1.0;
  double tau_slow_ms = 5.0;
  double onset_ms = 10.0;
};

struct SampledParams {
  std::vector<double> values;  // A
  double rate_hz = 1.0;
};

/// Current source I(t) in amperes, t in seconds from the acquisition trigger.
class Waveform {
 public:
  static Waveform square_wave(double frequency_hz, double amplitude_a, double duty = 0.5);
  static Waveform pulse_train(double fwd_ms, double rev_ms, double period_ms, double amplitude_a);
  static Waveform fepsp(double amplitude_a, const FepspParams& params = {});
  static Waveform sampled(std::vector<double> values_a, double rate_hz);
  static Waveform constant(double current_a) { return sampled({current_a}, 1.0); }

  WaveformKind kind() const { return kind_; }
  double amplitude() const { return amplitude_; }

  double sample(double t_s) const;

  /// True when sample(t) is the same for every t.
  bool is_constant() const;

  const SquareParams* square_params() const { return std::get_if<SquareParams>(&params_); }
  const PulseParams* pulse_params() const { return std::get_if<PulseParams>(&params_); }
  const FepspParams* fepsp_params() const { return std::get_if<FepspParams>(&params_); }
  const SampledParams* sampled_params() const { return std::get_if<SampledParams>(&params_); }

 private:
  using Params = std::variant<SquareParams, PulseParams, FepspParams, SampledParams>;
  Waveform(WaveformKind kind, double amplitude, Params params)
      : kind_(kind), amplitude_(amplitude), params_(std::move(params)) {}

  double fepsp_sample(const FepspParams& p, double t_ms) const;

  WaveformKind kind_;
  double amplitude_;
  Params params_;
  double fepsp_norm_ = 1.0;
};

std::string waveform_kind_name(WaveformKind kind);

/// CSV: header line `rate_hz=<value>`, then one current value (A) per line.
Waveform read_sampled_csv(const std::filesystem::path& path);
void write_sampled_csv(const std::filesystem::path& path, const SampledParams& params);

}  // namespace nvw
