#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fpmforge/core.hpp"
#include "fpmforge/simulator.hpp"
#include "fpmforge/stack.hpp"

namespace fpmforge::app {

struct ManifestImage {
  std::string file;
  int row = 0;
  int col = 0;
  double exposure = 1.0;
  std::string mask;  // processed datasets only; empty otherwise

  bool operator==(const ManifestImage&) const = default;
};

/// Dataset directory descriptor (manifest.json).
struct DatasetManifest {
  OpticsConfig optics;
  sim::LedGeometry led;
  sim::LedRange active;
  std::vector<ManifestImage> images;
  std::string dark_frame;    // empty = none
  std::string ground_truth;  // empty = none
  bool processed = false;

  bool operator==(const DatasetManifest& other) const;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

/// Checks that every referenced file exists, LED indices are unique and
/// there is exactly one image per active LED.
void validate_manifest(const DatasetManifest& m, const std::filesystem::path& dir);

std::string image_name(int row, int col);
std::string mask_name(int row, int col);

struct Dataset {
  std::filesystem::path dir;
  DatasetManifest manifest;
  CaptureStack stack;               // raw counts, or normalized values rescaled to counts
  std::vector<Mask> validity;       // processed datasets only
  std::vector<Mask> stray;          // processed datasets only
  std::optional<ComplexField> truth;
};

Dataset load_dataset(const std::filesystem::path& dir);

/// Mask file encoding: bit 0 = invalid pixel, bit 1 = stray-light pixel.
inline constexpr std::uint8_t kMaskInvalid = 1;
inline constexpr std::uint8_t kMaskStray = 2;

}  // namespace fpmforge::app
