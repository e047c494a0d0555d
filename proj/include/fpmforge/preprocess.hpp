#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpmforge/core.hpp"
#include "fpmforge/stack.hpp"

namespace fpmforge::prep {

struct SamplingReport {
  double effective_pixel_um = 0.0;
  double nyquist_raw_um = 0.0;
  double nyquist_synthetic_um = 0.0;
  bool ok_raw = false;
  bool ok_synthetic = false;
  int recommended_subfactor = 1;
};

SamplingReport check_sampling(const OpticsConfig& optics, double synthetic_na);

/// 1 marks a usable pixel; saturated (>= full scale) and empty (<= 0) pixels are 0.
Mask mark_saturation(const Image2D& raw, int bit_depth);

double invalid_fraction(const Mask& validity) noexcept;

/// Replaces isolated hot pixels by the mean of their unflagged 8-neighbours.
/// A pixel is hot when it exceeds its neighbourhood median by more than both
/// 10 x the neighbourhood MAD and 0.1.
Image2D replace_hot_pixels(const Image2D& normalized);

/// Same detector, returning the flag map instead of repairing.
Mask detect_hot_pixels(const Image2D& normalized);

enum class Illumination { BrightField, DarkField };

Illumination classify_illumination(const WaveVector& k, const OpticsConfig& optics);

/// Otsu level on a `levels`-bin histogram of a [0, 1] image. Bin b holds
/// values in [b / levels, (b + 1) / levels). The returned level t = k / levels
/// splits bins < k from bins >= k; ties resolve to the lowest k.
double otsu_threshold(const Image2D& normalized, int levels = 256);

/// Histogram bin of `value` under the same quantization otsu_threshold uses.
int otsu_bin(double value, int levels) noexcept;

struct StrayDetection {
  bool affected = false;
  Mask mask;                 // 1 = stray-light pixel
  std::vector<std::string> warnings;
};

inline constexpr double kDefaultEta = 0.1;
inline constexpr double kAffectedPixelFraction = 1e-4;
inline constexpr double kInvalidFractionGuideline = 0.15;

StrayDetection detect_stray_mask(const Image2D& normalized, bool is_dark_field,
                                 double eta = kDefaultEta);

/// Least-squares weight of the dark frame inside the regions, averaging the
/// per-region correlation sums.
double uniformity_alpha(const Image2D& measured, const Image2D& dark, const RegionSpec& regions);

/// max(measured - alpha * dark, 0).
Image2D weighted_subtract(const Image2D& measured, const Image2D& dark, double alpha);

/// Mean of per-image maxima minus mean of per-image standard deviations.
double threshold_bound(const std::vector<Image2D>& stack);

/// Zeroes pixels below i_th.
Image2D apply_threshold(const Image2D& normalized, double i_th);

/// Two corner rectangles, each a quarter of the width and height, at the
/// corners with the lowest mean of `reference`.
RegionSpec default_regions(const Image2D& reference);

enum class Uniformity { Weighted, Direct, None };

const char* to_string(Uniformity u);
Uniformity parse_uniformity(const std::string& text);

struct PreprocessParams {
  double eta = kDefaultEta;
  std::optional<double> i_th;        // nullopt = half the threshold bound
  std::optional<RegionSpec> regions; // nullopt = default_regions
  Uniformity uniformity = Uniformity::Weighted;
  bool stray_masks = true;
  bool hot_pixels = true;
};

struct MaskSet {
  std::vector<Mask> validity;
  std::vector<Mask> stray;
  std::vector<bool> affected;
  double invalid_fraction = 0.0;
};

struct ImageReport {
  double alpha = 0.0;
  bool affected = false;
  double invalid_fraction = 0.0;
  int hot_pixels = 0;
  std::string error;
};

struct PreprocessReport {
  std::vector<ImageReport> images;
  double threshold_bound = 0.0;
  double threshold_bound_after = 0.0;
  double i_th = 0.0;
  double eta = kDefaultEta;
  double invalid_fraction = 0.0;
  std::string uniformity;
  RegionSpec regions;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;
};

struct PreprocessResult {
  std::vector<Image2D> images;  // normalized, aligned with the input captures
  MaskSet masks;
  PreprocessReport report;
};

/// Normalize, mask saturation, repair hot pixels, detect stray light,
/// subtract the weighted dark frame and threshold, per capture.
PreprocessResult preprocess_stack(const CaptureStack& stack, const OpticsConfig& optics,
                                  const PreprocessParams& params);

}  // namespace fpmforge::prep
