#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nvw/field_map.hpp"
#include "nvw/lockin_camera.hpp"
#include "nvw/recon.hpp"

namespace nvw {

/// Header "NVWSTACK 1" (rows, cols, frames, fps, f_mod_hz, seed, ...), then
/// int16 LE payload: all I frames, then all Q frames, frame-major.
std::string encode_frame_stack(const FrameStack& stack);
FrameStack decode_frame_stack(const std::string& bytes);
void write_frame_stack(const std::filesystem::path& path, const FrameStack& stack);
FrameStack read_frame_stack(const std::filesystem::path& path);

/// Header "NVWSLOPE 1"; payload float64 planes slope, f0_mhz, operating_pv,
/// then one byte per pixel for the dead mask.
std::string encode_slope_map(const SlopeMap& map);
SlopeMap decode_slope_map(const std::string& bytes);
void write_slope_map(const std::filesystem::path& path, const SlopeMap& map);
SlopeMap read_slope_map(const std::filesystem::path& path);

/// Header "NVWOFFSET 1"; payload float64 per-pixel offset pv.
std::string encode_offset_map(const OffsetMap& map);
OffsetMap decode_offset_map(const std::string& bytes);
void write_offset_map(const std::filesystem::path& path, const OffsetMap& map);
OffsetMap read_offset_map(const std::filesystem::path& path);

void write_spectrum_csv(const std::filesystem::path& path, const AmplitudeSpectrum& s);
void write_timeseries_csv(const std::filesystem::path& path, std::span<const double> values_ut,
                          double fps, double t0_s = 0.0);
void write_noise_csv(const std::filesystem::path& path, const NoiseStats& stats);
void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);
void write_odmr_csv(const std::filesystem::path& path, const OdmrCurve& curve);

/// 8-bit binary PGM of |v| / max|v|. NaN and zero render black.
std::string render_pgm(const FieldMap& map);
/// Two lines: `min_uT <v>` and `max_uT <v>` over finite values.
std::string render_colorbar(const FieldMap& map);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct RunManifest {
  std::string stage;
  std::string config_hash;
  std::string tool_version;
  std::string started_utc;
  std::string finished_utc;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> outputs;

  /// Hashes `file` (absolute or relative to `dir`) and records it.
  void add_output(const std::filesystem::path& dir, const std::filesystem::path& file);
  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

std::string utc_timestamp();

}  // namespace nvw
