#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fpmforge/preprocess.hpp"
#include "fpmforge/reconstruct.hpp"
#include "fpmforge/simulator.hpp"

namespace fpmforge::app {

struct SweepConfig {
  std::vector<double> values{0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03};
  /// Phase-profile endpoints (x0, y0, x1, y1) in HR pixels; nullopt = horizontal midline.
  std::optional<std::array<int, 4>> line;

  bool operator==(const SweepConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output;  // empty = decided by the command line
  double eta = prep::kDefaultEta;
  std::optional<double> i_th;          // nullopt = "auto"
  std::optional<RegionSpec> regions;   // nullopt = "auto"
  prep::Uniformity uniformity = prep::Uniformity::Weighted;
  bool stray_masks = true;
  bool hot_pixels = true;
  recon::EpryParams epry;
  bool auto_sub_factor = true;
  sim::SimulationConfig simulate;
  SweepConfig sweep;

  void validate() const;
  prep::PreprocessParams preprocess_params() const;
};

RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace fpmforge::app
