#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fpmforge/core.hpp"
#include "fpmforge/stack.hpp"

namespace fpmforge::sim {

struct LedGeometry {
  int rows = 32;
  int cols = 32;
  double spacing_mm = 4.0;
  double height_mm = 86.0;
  double offset_x_mm = 0.0;
  double offset_y_mm = 0.0;

  void validate() const;
  /// Lateral offset of LED (row, col) from the optical axis. The axis passes
  /// through LED (rows / 2, cols / 2) when the offsets are zero.
  std::pair<double, double> lateral_mm(int row, int col) const noexcept;
  WaveVector wavevector(int row, int col) const noexcept;
};

/// Half-open LED index range.
struct LedRange {
  int row_begin = 0;
  int row_end = 0;
  int col_begin = 0;
  int col_end = 0;

  bool empty() const noexcept { return row_end <= row_begin || col_end <= col_begin; }
  bool operator==(const LedRange&) const = default;
};

/// The `side` x `side` block of LEDs around the optical axis.
LedRange centered_range(const LedGeometry& geom, int side);

struct LedIllumination {
  int row = 0;
  int col = 0;
  int index = 0;  // row * cols + col
  WaveVector k;
};

/// Active LEDs in center-outward spiral order.
std::vector<LedIllumination> led_wavevectors(const LedGeometry& geom, const LedRange& active);

/// Sampling of a centered spectrum: grid size and the spatial pixel pitch
/// of the matching spatial-domain grid.
struct SpectralGrid {
  int width = 0;
  int height = 0;
  double pixel_um = 0.0;

  double df_x() const noexcept { return 1.0 / (width * pixel_um); }
  double df_y() const noexcept { return 1.0 / (height * pixel_um); }
};

/// Pupil radius in frequency pixels along x and y.
std::pair<double, double> pupil_radius_px(const OpticsConfig& optics, const SpectralGrid& grid);

/// Ideal circular pupil (1 inside NA_obj / lambda, 0 outside) with an optional
/// quadratic defocus phase of `defocus_rad` at the pupil edge.
ComplexField make_pupil(const OpticsConfig& optics, const SpectralGrid& grid,
                        double defocus_rad = 0.0);

/// Spectrum-pixel offset of the sub-aperture selected by `k`, rounded.
std::pair<int, int> spectrum_shift(const WaveVector& k, const OpticsConfig& optics,
                                   const SpectralGrid& grid);

/// Noise-free binned intensity in exposure-1 units (before gain and quantization).
Grid<double> forward_intensity(const ComplexField& object_hr, const ComplexField& pupil,
                               const WaveVector& k, const OpticsConfig& optics, int down_factor);

/// Simulated camera frame: binned intensity times `exposure`, quantized to
/// optics.bit_depth and clipped at full scale.
Image2D forward_capture(const ComplexField& object_hr, const ComplexField& pupil,
                        const WaveVector& k, const OpticsConfig& optics, int down_factor,
                        double exposure);

struct StrayBlob {
  std::size_t image_index = 0;
  double cx = 0.0;
  double cy = 0.0;
  double radius_px = 0.0;
  double peak = 0.0;  // normalized intensity added inside the disk

  bool contains(int x, int y) const noexcept;
};

struct NoiseSpec {
  double gaussian_sigma = 0.0;          // normalized intensity
  std::optional<Image2D> dark_offset;   // normalized fixed-pattern dark signal
  std::vector<StrayBlob> stray_blobs;
  int hot_pixel_count = 0;
  double hot_pixel_peak = 0.0;
  bool clip = true;
  std::uint64_t seed = 0;
  int dark_exposures = 20;

  void validate(std::size_t stack_size, int width, int height) const;
};

/// Adds dark current (scaled by each capture's exposure), Gaussian read noise,
/// stray-light disks and hot pixels, then re-quantizes. Also synthesizes the
/// dark frame as the average of `dark_exposures` noisy dark captures.
CaptureStack inject_noise(const CaptureStack& stack, const NoiseSpec& spec);

/// Resolution-target-like amplitude bars on a dim background with a smooth
/// phase in [0, 1] rad.
ComplexField make_phantom(int size);

/// Union of the sub-apertures reachable by `ks`, as a spectrum mask.
Mask aperture_coverage(const OpticsConfig& optics, const SpectralGrid& grid,
                       const std::vector<WaveVector>& ks);

/// Zeroes spectral content outside `support`.
ComplexField band_limit(const ComplexField& spatial, const Mask& support);

struct NoiseConfig {
  double gaussian_sigma = 0.0;
  double dark_mean = 0.0;
  double dark_gradient = 0.0;        // peak-to-peak of the diagonal ramp
  double stray_fraction = 0.0;       // of dark-field images
  double stray_radius_min = 5.0;
  double stray_radius_max = 9.0;
  double stray_peak_min = 0.3;
  double stray_peak_max = 0.7;
  int hot_pixel_count = 0;
  double hot_pixel_peak = 0.5;
};

struct SimulationConfig {
  OpticsConfig optics{0.1, 4.0, 3.75, 16, 631.13};
  LedGeometry led;
  int active_side = 15;
  int hr_size = 256;
  int down_factor = 4;
  double brightness = 0.16;      // normalized level of a unit-amplitude clear object
  double exposure_jitter = 0.0;  // uniform relative spread of per-image exposure
  double defocus_rad = 0.0;
  NoiseConfig noise;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimulatedDataset {
  CaptureStack stack;
  std::vector<LedIllumination> leds;  // parallel to stack.captures
  ComplexField truth;                 // band-limited HR object
  NoiseSpec noise;
  /// Clean (pre-noise) stack, useful for scoring preprocessing.
  CaptureStack clean;
};

SimulatedDataset simulate_dataset(const SimulationConfig& config);

/// HR grid used by the simulator for `config`.
SpectralGrid hr_grid(const SimulationConfig& config);

}  // namespace fpmforge::sim
