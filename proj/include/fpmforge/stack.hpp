#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpmforge/core.hpp"

namespace fpmforge {

/// Direction sines of a plane-wave illumination.
struct WaveVector {
  double sin_x = 0.0;
  double sin_y = 0.0;

  double na() const noexcept;
  bool valid() const noexcept { return sin_x * sin_x + sin_y * sin_y < 1.0; }
};

struct Capture {
  Image2D image;
  int led_row = 0;
  int led_col = 0;
  WaveVector k;
  /// Exposure relative to the dark frame's exposure.
  double exposure = 1.0;
};

struct CaptureStack {
  std::vector<Capture> captures;
  std::optional<Image2D> dark;

  std::size_t size() const noexcept { return captures.size(); }
  bool empty() const noexcept { return captures.empty(); }
};

/// Indices sorted by illumination NA, ties broken by azimuth; low NA first.
std::vector<std::size_t> center_outward_order(const std::vector<WaveVector>& ks);

}  // namespace fpmforge
