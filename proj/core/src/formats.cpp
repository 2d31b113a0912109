#include "nvw/formats.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <nlohmann/json.hpp>

#include "io_util.hpp"
#include "nvw/errors.hpp"

namespace nvw {

namespace {

constexpr std::size_t kMaxDim = 1u << 16;

void check_dims(const detail::Header& h, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0 || rows > kMaxDim || cols > kMaxDim) {
    throw FormatError("implausible dimensions", h.offsets.at("rows"));
  }
}

void check_end(const std::string& bytes, std::size_t end) {
  if (bytes.size() != end) {
    throw FormatError("trailing bytes after payload", end);
  }
}

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string encode_frame_stack(const FrameStack& stack) {
  const std::size_t n = stack.pixels() * stack.frames;
  if (stack.i_codes.size() != n || stack.q_codes.size() != n) {
    throw InvalidArgument("frame stack planes do not match rows*cols*frames");
  }
  std::string out = detail::HeaderWriter("NVWSTACK", 1)
                        .add("rows", static_cast<std::uint64_t>(stack.rows))
                        .add("cols", static_cast<std::uint64_t>(stack.cols))
                        .add("frames", static_cast<std::uint64_t>(stack.frames))
                        .add("fps", stack.fps)
                        .add("f_mod_hz", stack.f_mod_hz)
                        .add("mw_frequency_mhz", stack.mw_frequency_mhz)
                        .add("trigger_phase_rad", stack.trigger_phase_rad)
                        .add("t0_s", stack.t0_s)
                        .add("seed", stack.seed)
                        .add("acquisition", stack.acquisition)
                        .finish();
  out.reserve(out.size() + 2 * n * sizeof(std::int16_t));
  detail::append_le(out, stack.i_codes);
  detail::append_le(out, stack.q_codes);
  return out;
}

FrameStack decode_frame_stack(const std::string& bytes) {
  const detail::Header h = detail::parse_header(bytes, "NVWSTACK", 1);
  FrameStack s;
  s.rows = h.get_uint("rows");
  s.cols = h.get_uint("cols");
  s.frames = h.get_uint("frames");
  check_dims(h, s.rows, s.cols);
  if (s.frames == 0 || s.frames > (1u << 24)) {
    throw FormatError("implausible frame count", h.offsets.at("frames"));
  }
  s.fps = h.get_double("fps");
  s.f_mod_hz = h.get_double("f_mod_hz");
  s.mw_frequency_mhz = h.get_double("mw_frequency_mhz");
  s.trigger_phase_rad = h.get_double("trigger_phase_rad");
  s.t0_s = h.get_double("t0_s");
  s.seed = h.get_uint("seed");
  s.acquisition = h.get_uint("acquisition");
  const std::size_t n = s.pixels() * s.frames;
  s.i_codes = detail::read_le<std::int16_t>(bytes, h.payload_offset, n);
  const std::size_t q_at = h.payload_offset + n * sizeof(std::int16_t);
  s.q_codes = detail::read_le<std::int16_t>(bytes, q_at, n);
  check_end(bytes, q_at + n * sizeof(std::int16_t));
  return s;
}

void write_frame_stack(const std::filesystem::path& path, const FrameStack& stack) {
  detail::write_file_atomic(path, encode_frame_stack(stack));
}

FrameStack read_frame_stack(const std::filesystem::path& path) {
  return decode_frame_stack(detail::read_file(path));
}

std::string encode_slope_map(const SlopeMap& map) {
  const std::size_t n = map.pixels();
  if (map.slope.size() != n || map.f0_mhz.size() != n || map.operating_pv.size() != n ||
      map.dead.size() != n) {
    throw InvalidArgument("slope map planes do not match rows*cols");
  }
  std::string out = detail::HeaderWriter("NVWSLOPE", 1)
                        .add("rows", static_cast<std::uint64_t>(map.rows))
                        .add("cols", static_cast<std::uint64_t>(map.cols))
                        .add("f_max_mhz", map.f_max_mhz)
                        .add("field_sign", static_cast<double>(map.field_sign))
                        .add("slope_floor", map.slope_floor)
                        .add("units", "codes_per_mhz")
                        .finish();
  detail::append_le(out, map.slope);
  detail::append_le(out, map.f0_mhz);
  detail::append_le(out, map.operating_pv);
  detail::append_le(out, map.dead);
  return out;
}

SlopeMap decode_slope_map(const std::string& bytes) {
  const detail::Header h = detail::parse_header(bytes, "NVWSLOPE", 1);
  SlopeMap m;
  m.rows = h.get_uint("rows");
  m.cols = h.get_uint("cols");
  check_dims(h, m.rows, m.cols);
  m.f_max_mhz = h.get_double("f_max_mhz");
  const double sign = h.get_double("field_sign");
  if (sign != 1.0 && sign != -1.0) {
    throw FormatError("field_sign must be +1 or -1", h.offsets.at("field_sign"));
  }
  m.field_sign = static_cast<int>(sign);
  m.slope_floor = h.get_double("slope_floor");
  const std::size_t n = m.pixels();
  std::size_t at = h.payload_offset;
  m.slope = detail::read_le<double>(bytes, at, n);
  at += n * sizeof(double);
  m.f0_mhz = detail::read_le<double>(bytes, at, n);
  at += n * sizeof(double);
  m.operating_pv = detail::read_le<double>(bytes, at, n);
  at += n * sizeof(double);
  m.dead = detail::read_le<unsigned char>(bytes, at, n);
  check_end(bytes, at + n);
  return m;
}

void write_slope_map(const std::filesystem::path& path, const SlopeMap& map) {
  detail::write_file_atomic(path, encode_slope_map(map));
}

SlopeMap read_slope_map(const std::filesystem::path& path) {
  return decode_slope_map(detail::read_file(path));
}

std::string encode_offset_map(const OffsetMap& map) {
  if (map.pv.size() != map.rows * map.cols) {
    throw InvalidArgument("offset map size does not match rows*cols");
  }
  std::string out = detail::HeaderWriter("NVWOFFSET", 1)
                        .add("rows", static_cast<std::uint64_t>(map.rows))
                        .add("cols", static_cast<std::uint64_t>(map.cols))
                        .add("units", "codes")
                        .finish();
  detail::append_le(out, map.pv);
  return out;
}

OffsetMap decode_offset_map(const std::string& bytes) {
  const detail::Header h = detail::parse_header(bytes, "NVWOFFSET", 1);
  OffsetMap m;
  m.rows = h.get_uint("rows");
  m.cols = h.get_uint("cols");
  check_dims(h, m.rows, m.cols);
  m.pv = detail::read_le<double>(bytes, h.payload_offset, m.rows * m.cols);
  check_end(bytes, h.payload_offset + m.pv.size() * sizeof(double));
  return m;
}

void write_offset_map(const std::filesystem::path& path, const OffsetMap& map) {
  detail::write_file_atomic(path, encode_offset_map(map));
}

OffsetMap read_offset_map(const std::filesystem::path& path) {
  return decode_offset_map(detail::read_file(path));
}

void write_spectrum_csv(const std::filesystem::path& path, const AmplitudeSpectrum& s) {
  std::string out = "freq_hz,amplitude_uT\n";
  for (std::size_t k = 0; k < s.freq_hz.size(); ++k) {
    out += csv_number(s.freq_hz[k]) + "," + csv_number(s.amplitude[k]) + "\n";
  }
  detail::write_file_atomic(path, out);
}

void write_timeseries_csv(const std::filesystem::path& path, std::span<const double> values_ut,
                          double fps, double t0_s) {
  std::string out = "t_s,field_uT\n";
  for (std::size_t f = 0; f < values_ut.size(); ++f) {
    out += csv_number(t0_s + static_cast<double>(f) / fps) + "," + csv_number(values_ut[f]) + "\n";
  }
  detail::write_file_atomic(path, out);
}

void write_noise_csv(const std::filesystem::path& path, const NoiseStats& stats) {
  std::string out = "n,std_uT\n";
  for (std::size_t i = 0; i < stats.n.size(); ++i) {
    out += std::to_string(stats.n[i]) + "," + csv_number(stats.std_ut[i]) + "\n";
  }
  detail::write_file_atomic(path, out);
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
  std::string out = "std_uT,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out += csv_number(h.center(i)) + "," + std::to_string(h.counts[i]) + "\n";
  }
  detail::write_file_atomic(path, out);
}

void write_odmr_csv(const std::filesystem::path& path, const OdmrCurve& curve) {
  std::string out = "f_mhz,mean_pv,mean_slope\n";
  for (std::size_t k = 0; k < curve.f_mhz.size(); ++k) {
    const double s = k < curve.mean_slope.size() ? curve.mean_slope[k] : NAN;
    out += csv_number(curve.f_mhz[k]) + "," + csv_number(curve.mean_pv[k]) + "," +
           (std::isfinite(s) ? csv_number(s) : std::string()) + "\n";
  }
  detail::write_file_atomic(path, out);
}

std::string render_pgm(const FieldMap& map) {
  if (map.values.size() != map.rows * map.cols || map.values.empty()) {
    throw InvalidArgument("cannot render an empty map");
  }
  const double m = map.max_abs();
  std::string out = "P5\n" + std::to_string(map.cols) + " " + std::to_string(map.rows) + "\n255\n";
  const std::size_t at = out.size();
  out.resize(at + map.values.size(), '\0');
  if (m > 0.0) {
    for (std::size_t p = 0; p < map.values.size(); ++p) {
      const double v = map.values[p];
      if (!std::isfinite(v)) {
        continue;
      }
      const long code = std::lround(std::abs(v) / m * 255.0);
      out[at + p] = static_cast<char>(static_cast<unsigned char>(std::clamp(code, 0L, 255L)));
    }
  }
  return out;
}

std::string render_colorbar(const FieldMap& map) {
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (double v : map.values) {
    if (!std::isfinite(v)) {
      continue;
    }
    lo = any ? std::min(lo, v) : v;
    hi = any ? std::max(hi, v) : v;
    any = true;
  }
  const std::string unit = map.units.empty() ? "uT" : map.units;
  return "min_" + unit + " " + detail::format_double(lo) + "\nmax_" + unit + " " +
         detail::format_double(hi) + "\nabs_max_" + unit + " " +
         detail::format_double(map.max_abs()) + "\n";
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(detail::read_file(path));
}

void RunManifest::add_output(const std::filesystem::path& dir, const std::filesystem::path& file) {
  const std::filesystem::path full = file.is_absolute() ? file : dir / file;
  const std::string bytes = detail::read_file(full);
  ManifestEntry e;
  e.path = std::filesystem::relative(full, dir).generic_string();
  e.sha256 = sha256_hex(bytes);
  e.bytes = bytes.size();
  outputs.push_back(std::move(e));
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["config_sha256"] = config_hash;
  j["tool_version"] = tool_version;
  j["seed"] = seed;
  j["started_utc"] = started_utc;
  j["finished_utc"] = finished_utc;
  j["outputs"] = nlohmann::ordered_json::array();
  for (const ManifestEntry& e : outputs) {
    j["outputs"].push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  }
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.stage = j.at("stage").get<std::string>();
    m.config_hash = j.at("config_sha256").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started_utc = j.at("started_utc").get<std::string>();
    m.finished_utc = j.at("finished_utc").get<std::string>();
    for (const auto& e : j.at("outputs")) {
      m.outputs.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>(),
                           e.at("bytes").get<std::uint64_t>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what(), 0);
  }
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  detail::write_file_atomic(path, manifest.to_json());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  return RunManifest::from_json(detail::read_file(path));
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace nvw
