#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "nvw/config.hpp"

namespace nvw {

inline constexpr const char* kToolVersion = "0.1.0";

/// Process exit codes of the command line stages.
enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,              // bad config, I/O, malformed files
  kExitCalibrationFailed = 2,
  kExitMismatch = 3,           // config/stack mismatch, empty stack list
};

int exit_code_for(const std::exception& e);

/// Stage outputs live under `out`: calibration/, stacks/, analysis/, each
/// with its own manifest.json written last.
struct StagePaths {
  std::filesystem::path out;

  std::filesystem::path calibration() const { return out / "calibration"; }
  std::filesystem::path stacks() const { return out / "stacks"; }
  std::filesystem::path analysis() const { return out / "analysis"; }
  std::filesystem::path slopes() const { return calibration() / "slopes.nvwslope"; }
  std::filesystem::path offsets() const { return calibration() / "offsets.nvwoffset"; }
};

/// Coarse analytic sweep, fine synthesized scan, slope map and offsets.
void cmd_calibrate(const ExperimentConfig& config, const std::filesystem::path& out,
                   std::ostream& log);

/// Synthesizes `acquisitions` trigger-aligned stacks.
void cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& out,
                  std::ostream& log);

/// Field reconstruction, spectra, pulse/fEPSP maps and noise statistics.
void cmd_analyze(const ExperimentConfig& config, const std::filesystem::path& out,
                 std::ostream& log);

/// PGM render of a map file plus a colorbar sidecar, written to `out_dir`.
void cmd_render(const std::filesystem::path& map_file, const std::filesystem::path& out_dir,
                std::ostream& log);

/// Loads the config (applying a seed override) and runs one stage. Errors
/// are reported on `err` and mapped to exit codes.
int run_stage(const std::string& stage, const std::filesystem::path& config_path,
              std::optional<std::uint64_t> seed, const std::filesystem::path& out,
              const std::filesystem::path& map_file, std::ostream& log, std::ostream& err);

}  // namespace nvw
