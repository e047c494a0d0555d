#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fpmforge/config.hpp"
#include "fpmforge/dataset.hpp"

namespace fpmforge::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitWarnings = 2;

struct CommandOptions {
  std::filesystem::path config;
  std::vector<std::filesystem::path> datasets;  // report: run directories
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  bool skip_uniformity = false;
  bool no_preprocess = false;
};

/// Dispatches `command`, converting errors into exit code 1 with a message on `log`.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& log);

/// Worker count for sweeps: FPMFORGE_THREADS if set, else the hardware concurrency.
int worker_count();

struct PreparedInput {
  recon::EpryInput input;
  std::optional<prep::PreprocessResult> preprocess;
  std::vector<std::string> warnings;
};

enum class PrepMode { Default, NoPreprocess, SkipUniformity };

/// Builds the reconstructor input from a dataset. Raw datasets are
/// preprocessed unless `mode` is NoPreprocess; processed datasets are used as is.
PreparedInput prepare_input(const Dataset& dataset, const RunConfig& config, PrepMode mode);

struct RunResult {
  recon::Reconstruction recon;
  recon::EpryParams params;
  double final_fidelity = 0.0;
  std::optional<double> rmse;
  double wall_time_s = 0.0;
};

/// Resolves sub_factor "auto" and runs the reconstructor; scores against the
/// dataset's ground truth when its size matches the HR grid.
RunResult run_reconstruction(const Dataset& dataset, const RunConfig& config, const recon::EpryInput& input);

/// Sub-factor recommended by the sampling check for this dataset's illumination.
int auto_sub_factor(const Dataset& dataset);

/// Recovered object with its global phase removed (against the truth when given).
ComplexField phase_aligned_object(const recon::Reconstruction& r, const std::optional<ComplexField>& truth);

/// Phase samples along the segment (x0, y0)-(x1, y1), one per pixel step.
std::vector<double> phase_profile(const ComplexField& object, const std::array<int, 4>& line);

int cmd_simulate(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);
int cmd_preprocess(const RunConfig& config, const std::filesystem::path& dataset, const std::filesystem::path& out,
                   bool skip_uniformity, std::ostream& log);
int cmd_reconstruct(const RunConfig& config, const std::filesystem::path& dataset, const std::filesystem::path& out,
                    PrepMode mode, std::ostream& log);
int cmd_pipeline(const RunConfig& config, const std::filesystem::path& dataset, const std::filesystem::path& out,
                 PrepMode mode, std::ostream& log);
int cmd_sweep_threshold(const RunConfig& config, const std::filesystem::path& dataset,
                        const std::filesystem::path& out, PrepMode mode, std::ostream& log);
int cmd_report(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out, std::ostream& log);

/// Column order of report.csv.
const std::vector<std::string>& report_columns();

}  // namespace fpmforge::app
