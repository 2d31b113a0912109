#include "nvw/lockin_camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>

#include "nvw/errors.hpp"
#include "nvw/parallel.hpp"
#include "nvw/random.hpp"

namespace nvw {

namespace {

signed char square(double phase) { return phase - std::floor(phase) < 0.5 ? 1 : -1; }

double quantize(double v) { return std::clamp(std::round(v), 0.0, static_cast<double>(kMaxCode)); }

}  // namespace

void AcquisitionConfig::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw ConfigError("fps must be positive");
  }
  if (!(f_mod_hz >= 2.0 * fps) || !std::isfinite(f_mod_hz)) {
    throw ConfigError("modulation frequency must be at least twice the frame rate");
  }
  if (frames_per_acq == 0) {
    throw ConfigError("frames_per_acq must be positive");
  }
  if (n_acquisitions == 0) {
    throw ConfigError("n_acquisitions must be positive");
  }
  if (!(photons_per_pixel_per_frame >= 0.0) || !std::isfinite(photons_per_pixel_per_frame)) {
    throw ConfigError("photon budget must be non-negative");
  }
  if (samples_per_half_period == 0) {
    throw ConfigError("samples_per_half_period must be positive");
  }
  if (!std::isfinite(trigger_phase_rad) || !std::isfinite(mw_frequency_mhz)) {
    throw ConfigError("trigger phase and microwave frequency must be finite");
  }
  if (!(acquisition_gap_s >= 0.0)) {
    throw ConfigError("acquisition gap must be non-negative");
  }
}

std::size_t AcquisitionConfig::periods_per_frame() const {
  return static_cast<std::size_t>(std::floor(f_mod_hz / fps + 1e-9));
}

double AcquisitionConfig::window_fraction() const {
  return static_cast<double>(periods_per_frame()) * fps / f_mod_hz;
}

double desync_attenuation(double f_mod_hz, const DesyncModel& model) {
  if (!model.enabled || f_mod_hz <= model.threshold_hz) {
    return 1.0;
  }
  const double g = 1.0 - model.rolloff_per_khz * (f_mod_hz - model.threshold_hz) * 1e-3;
  return std::clamp(g, 0.0, 1.0);
}

double photon_budget_from_power(double power_w, double wavelength_nm, double frame_period_s) {
  if (!(power_w >= 0.0)) {
    throw InvalidArgument("optical power must be non-negative");
  }
  constexpr double h = 6.62607015e-34;
  constexpr double c = 299792458.0;
  const double photon_j = h * c / (wavelength_nm * 1e-9);
  return power_w * frame_period_s / photon_j;
}

double pv_amplitude(double i, double q) {
  return std::min(std::sqrt(i * i + q * q), static_cast<double>(kMaxCode));
}

double FrameStack::pv(std::size_t frame, std::size_t pixel) const {
  return pv_amplitude(i(frame, pixel), q(frame, pixel));
}

Scene Scene::zero(std::size_t pixels) {
  Scene s;
  s.coupling_t.assign(pixels, 0.0);
  s.drive = [](double) { return 0.0; };
  s.is_static = true;
  return s;
}

Scene Scene::from_waveform(const FieldMap& per_amp, const Waveform& waveform) {
  Scene s;
  s.coupling_t.resize(per_amp.values.size());
  const double to_t = per_amp.units == "T" ? 1.0 : 1e-6;
  for (std::size_t i = 0; i < per_amp.values.size(); ++i) {
    s.coupling_t[i] = per_amp.values[i] * to_t;
  }
  s.drive = [waveform](double t) { return waveform.sample(t); };
  s.is_static = waveform.is_constant();
  return s;
}

void CameraModel::validate() const {
  grid.validate();
  if (!(illumination_ratio >= 1.0)) {
    throw ConfigError("illumination ratio must be >= 1");
  }
  if (!(f0_scatter_mhz >= 0.0)) {
    throw ConfigError("resonance scatter must be non-negative");
  }
  if (!(gain_codes > 0.0) || !(gain_reference_photons >= 0.0)) {
    throw ConfigError("camera gain must be positive");
  }
  if (!(offset_i_min <= offset_i_max) || !(offset_q_min <= offset_q_max) ||
      offset_i_min < 0.0 || offset_q_min < 0.0 || offset_i_max > kMaxCode ||
      offset_q_max > kMaxCode) {
    throw ConfigError("offset ranges must lie within the 10-bit code range");
  }
  if (!is_finite(bias_t)) {
    throw ConfigError("bias field must be finite");
  }
  if (!(fixed_pattern_noise_codes >= 0.0)) {
    throw ConfigError("fixed-pattern noise must be non-negative");
  }
}

LockinCamera::LockinCamera(CameraModel model, NVModel nv) : model_(std::move(model)), nv_(nv) {
  model_.validate();
  nv_.validate();
  const PixelGrid& g = model_.grid;
  const std::size_t n = g.size();
  illumination_.resize(n);
  f0_offset_.resize(n);
  offset_i_.resize(n);
  offset_q_.resize(n);
  const double lo = 1.0 / model_.illumination_ratio;
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      const std::size_t p = g.index(r, c);
      const double t = g.cols > 1 ? static_cast<double>(c) / static_cast<double>(g.cols - 1) : 1.0;
      illumination_[p] = lo + (1.0 - lo) * t;

      CounterRng scatter(stream_key(model_.seed, Stream::resonance_scatter, p));
      f0_offset_[p] = model_.f0_scatter_mhz * (2.0 * scatter.uniform() - 1.0);

      CounterRng offs(stream_key(model_.seed, Stream::pixel_offsets, p));
      offset_i_[p] = model_.offset_i_min + (model_.offset_i_max - model_.offset_i_min) * offs.uniform();
      offset_q_[p] = model_.offset_q_min + (model_.offset_q_max - model_.offset_q_min) * offs.uniform();
    }
  }
}

double LockinCamera::center_frequency_mhz() const {
  return sensing_resonance(model_.bias_t, nv_);
}

double LockinCamera::resonance_mhz(std::size_t pixel, double field_t) const {
  const double axial = dot(model_.bias_t, nv_.axis()) + field_t;
  return nv_.zero_field_splitting_mhz +
         static_cast<int>(nv_.branch) * nv_.mhz_per_tesla() * std::abs(axial) + f0_offset_[pixel];
}

double LockinCamera::code_gain(const AcquisitionConfig& acq) const {
  const double ref = model_.gain_reference_photons > 0.0 ? model_.gain_reference_photons
                                                         : acq.photons_per_pixel_per_frame;
  if (!(ref > 0.0)) {
    return 0.0;
  }
  return model_.gain_codes / (ref * acq.window_fraction());
}

double LockinCamera::per_sample_base(const AcquisitionConfig& acq, std::size_t pixel) const {
  const double ratio = acq.f_mod_hz / acq.fps;
  return acq.photons_per_pixel_per_frame * illumination_[pixel] /
         (ratio * 2.0 * static_cast<double>(acq.samples_per_half_period));
}

PreparedScene LockinCamera::prepare(const Scene& scene, const AcquisitionConfig& acq,
                                    unsigned workers, std::size_t cache_limit_bytes) const {
  acq.validate();
  if (scene.coupling_t.size() != pixels()) {
    throw MismatchError("scene size does not match the pixel grid");
  }
  PreparedScene prep;
  prep.acq_ = acq;
  prep.scene_ = scene;

  const std::size_t n = acq.samples_per_frame();
  const double two_s = 2.0 * static_cast<double>(acq.samples_per_half_period);
  const double dt = 1.0 / (two_s * acq.f_mod_hz);
  const double fm_shift = acq.trigger_phase_rad / (2.0 * std::numbers::pi);
  const double static_drive = scene.is_static ? scene.drive(0.0) : 0.0;

  std::unordered_map<std::string, std::size_t> index;
  prep.frame_signature_.resize(acq.frames_per_acq);
  PreparedScene::Signature sig;
  sig.drive.resize(n);
  sig.ref_i.resize(n);
  sig.ref_q.resize(n);
  sig.fm.resize(n);
  std::string key;
  for (std::size_t f = 0; f < acq.frames_per_acq; ++f) {
    const double t_f = static_cast<double>(f) / acq.fps;
    const double phi0 = acq.f_mod_hz * t_f;
    for (std::size_t j = 0; j < n; ++j) {
      const double u = (static_cast<double>(j) + 0.5) / two_s;
      const double phi = phi0 + u;
      sig.drive[j] = scene.is_static ? static_drive
                                     : scene.drive(t_f + (static_cast<double>(j) + 0.5) * dt);
      sig.ref_i[j] = square(phi);
      sig.ref_q[j] = square(phi - 0.25);
      sig.fm[j] = square(phi - fm_shift);
    }
    key.assign(reinterpret_cast<const char*>(sig.drive.data()), n * sizeof(double));
    key.append(reinterpret_cast<const char*>(sig.ref_i.data()), n);
    key.append(reinterpret_cast<const char*>(sig.ref_q.data()), n);
    key.append(reinterpret_cast<const char*>(sig.fm.data()), n);
    auto [it, inserted] = index.emplace(key, prep.signatures_.size());
    if (inserted) {
      prep.signatures_.push_back(sig);
    }
    prep.frame_signature_[f] = it->second;
  }

  const std::size_t u = prep.signatures_.size();
  const std::size_t bytes = pixels() * u * 4 * sizeof(float);
  if (bytes <= cache_limit_bytes) {
    prep.aggregates_.resize(pixels() * u * 4);
    parallel_for(pixels(), workers, [&](std::size_t p0, std::size_t p1) {
      for (std::size_t p = p0; p < p1; ++p) {
        pixel_aggregates(prep, p, prep.aggregates_.data() + p * u * 4);
      }
    });
  }
  return prep;
}

void LockinCamera::pixel_aggregates(const PreparedScene& prep, std::size_t pixel,
                                    float* out) const {
  const AcquisitionConfig& acq = prep.acq_;
  const double base = per_sample_base(acq, pixel);
  const double coupling = prep.scene_.coupling_t[pixel];
  const double dev = nv_.fm_deviation_mhz;
  const double f_mw = acq.mw_frequency_mhz;
  for (std::size_t s = 0; s < prep.signatures_.size(); ++s) {
    const auto& sig = prep.signatures_[s];
    double si = 0.0;
    double sq = 0.0;
    double sv = 0.0;
    double sc = 0.0;
    double last_drive = std::numeric_limits<double>::quiet_NaN();
    double f0 = 0.0;
    for (std::size_t j = 0; j < sig.drive.size(); ++j) {
      if (!(sig.drive[j] == last_drive)) {
        last_drive = sig.drive[j];
        f0 = resonance_mhz(pixel, coupling * last_drive);
      }
      const double mu = base * lorentzian_pv(f_mw + sig.fm[j] * dev, f0, nv_);
      si += sig.ref_i[j] * mu;
      sq += sig.ref_q[j] * mu;
      sv += mu;
      sc += sig.ref_i[j] * sig.ref_q[j] * mu;
    }
    out[4 * s + 0] = static_cast<float>(si);
    out[4 * s + 1] = static_cast<float>(sq);
    out[4 * s + 2] = static_cast<float>(sv);
    out[4 * s + 3] = static_cast<float>(sc);
  }
}

FrameStack LockinCamera::synthesize(const PreparedScene& prep, std::uint64_t acquisition,
                                    unsigned workers) const {
  const AcquisitionConfig& acq = prep.acq_;
  const std::size_t n_pix = pixels();
  FrameStack stack;
  stack.rows = model_.grid.rows;
  stack.cols = model_.grid.cols;
  stack.frames = acq.frames_per_acq;
  stack.fps = acq.fps;
  stack.f_mod_hz = acq.f_mod_hz;
  stack.mw_frequency_mhz = acq.mw_frequency_mhz;
  stack.trigger_phase_rad = acq.trigger_phase_rad;
  stack.seed = acq.seed;
  stack.acquisition = acquisition;
  stack.i_codes.assign(stack.frames * n_pix, 0);
  stack.q_codes.assign(stack.frames * n_pix, 0);
  if (!(acq.photons_per_pixel_per_frame > 0.0)) {
    return stack;
  }

  const std::size_t u = prep.signatures_.size();
  const double gain = code_gain(acq);
  const double desync = desync_attenuation(acq.f_mod_hz, model_.desync);
  const double dev = nv_.fm_deviation_mhz;

  parallel_for(n_pix, workers, [&](std::size_t p0, std::size_t p1) {
    std::vector<float> local(prep.cached() ? 0 : u * 4);
    for (std::size_t p = p0; p < p1; ++p) {
      const float* agg = nullptr;
      if (prep.cached()) {
        agg = prep.aggregates_.data() + p * u * 4;
      } else {
        pixel_aggregates(prep, p, local.data());
        agg = local.data();
      }
      const double base = per_sample_base(acq, p);
      const bool gaussian =
          !model_.shot_noise || base * (1.0 - nv_.contrast) >= model_.gaussian_threshold;

      CounterRng rng(stream_key(acq.seed, Stream::shot_noise, acquisition, p));
      CounterRng fp_rng(stream_key(acq.seed, Stream::fixed_pattern, 0, p));
      std::normal_distribution<double> normal;
      std::normal_distribution<double> fp_normal;

      for (std::size_t f = 0; f < acq.frames_per_acq; ++f) {
        const std::size_t s = prep.frame_signature_[f];
        const double mi = agg[4 * s + 0];
        const double mq = agg[4 * s + 1];
        const double var = agg[4 * s + 2];
        const double cov = agg[4 * s + 3];
        double xi = desync * mi;
        double xq = desync * mq;
        if (model_.shot_noise && gaussian) {
          const double z1 = normal(rng);
          const double z2 = normal(rng);
          const double sd = std::sqrt(var);
          const double c = sd > 0.0 ? cov / sd : 0.0;
          xi += sd * z1;
          xq += c * z1 + std::sqrt(std::max(var - c * c, 0.0)) * z2;
        } else if (model_.shot_noise) {
          const auto& sig = prep.signatures_[s];
          const double coupling = prep.scene_.coupling_t[p];
          double ci = 0.0;
          double cq = 0.0;
          for (std::size_t j = 0; j < sig.drive.size(); ++j) {
            const double f0 = resonance_mhz(p, coupling * sig.drive[j]);
            const double mu =
                base * lorentzian_pv(acq.mw_frequency_mhz + sig.fm[j] * dev, f0, nv_);
            std::poisson_distribution<long> poisson(mu);
            const double k = static_cast<double>(poisson(rng));
            ci += sig.ref_i[j] * k;
            cq += sig.ref_q[j] * k;
          }
          // desync scales only the coherent part
          xi = ci + (desync - 1.0) * mi;
          xq = cq + (desync - 1.0) * mq;
        }
        double fp = 0.0;
        if (model_.fixed_pattern_noise_codes > 0.0) {
          fp = model_.fixed_pattern_noise_codes * fp_normal(fp_rng);
        }
        const std::size_t idx = f * n_pix + p;
        stack.i_codes[idx] = static_cast<std::int16_t>(quantize(offset_i_[p] + gain * xi + fp));
        stack.q_codes[idx] = static_cast<std::int16_t>(quantize(offset_q_[p] + gain * xq));
      }
    }
  });
  return stack;
}

FrameStack LockinCamera::synthesize_acquisition(const Scene& scene, const AcquisitionConfig& acq,
                                                std::uint64_t acquisition,
                                                unsigned workers) const {
  return synthesize(prepare(scene, acq, workers, 0), acquisition, workers);
}

std::pair<double, double> LockinCamera::expected_iq(std::size_t pixel,
                                                    const AcquisitionConfig& acq,
                                                    double field_t) const {
  if (!(acq.photons_per_pixel_per_frame > 0.0)) {
    return {0.0, 0.0};
  }
  AcquisitionConfig one = acq;
  one.frames_per_acq = 1;
  Scene scene;
  scene.coupling_t.assign(pixels(), 0.0);
  scene.coupling_t[pixel] = field_t;
  scene.drive = [](double) { return 1.0; };
  scene.is_static = true;
  const PreparedScene prep = prepare(scene, one, 1, 0);
  const double gain = code_gain(acq);
  const auto& sig = prep.signatures_[0];
  const double base = per_sample_base(acq, pixel);
  const double f0 = resonance_mhz(pixel, field_t);
  double si = 0.0;
  double sq = 0.0;
  for (std::size_t j = 0; j < sig.drive.size(); ++j) {
    const double mu =
        base * lorentzian_pv(acq.mw_frequency_mhz + sig.fm[j] * nv_.fm_deviation_mhz, f0, nv_);
    si += sig.ref_i[j] * mu;
    sq += sig.ref_q[j] * mu;
  }
  const double desync = desync_attenuation(acq.f_mod_hz, model_.desync);
  return {offset_i_[pixel] + gain * desync * si, offset_q_[pixel] + gain * desync * sq};
}

double LockinCamera::expected_slope_codes(std::size_t pixel, const AcquisitionConfig& acq,
                                          double field_t) const {
  const double h = 1e-3;
  AcquisitionConfig lo = acq;
  AcquisitionConfig hi = acq;
  lo.mw_frequency_mhz -= h;
  hi.mw_frequency_mhz += h;
  const auto [il, ql] = expected_iq(pixel, lo, field_t);
  const auto [ih, qh] = expected_iq(pixel, hi, field_t);
  return (std::hypot(ih, qh) - std::hypot(il, ql)) / (2.0 * h);
}

std::vector<double> LockinCamera::intensity_image(double f_mw_mhz,
                                                  double photons_per_frame) const {
  std::vector<double> out(pixels());
  for (std::size_t p = 0; p < pixels(); ++p) {
    out[p] = photons_per_frame * illumination_[p] *
             odmr_intensity(f_mw_mhz - f0_offset_[p], model_.bias_t, nv_);
  }
  return out;
}

}  // namespace nvw
