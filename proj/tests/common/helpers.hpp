#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "fpmforge/core.hpp"

namespace testutil {

inline fpmforge::ComplexField random_field(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  fpmforge::ComplexField f(w, h, fpmforge::Space::Spatial);
  for (auto& v : f.values()) v = {n(rng), n(rng)};
  return f;
}

inline fpmforge::Image2D random_unit_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  fpmforge::Image2D img(w, h, fpmforge::Domain::Normalized);
  for (auto& v : img.values()) v = u(rng);
  return img;
}

/// Centered unitary DFT evaluated term by term.
inline fpmforge::ComplexField naive_dft_centered(const fpmforge::ComplexField& x, int sign) {
  const int w = x.width();
  const int h = x.height();
  const double pi = 3.14159265358979323846;
  fpmforge::ComplexField out(w, h, fpmforge::Space::Fourier);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      std::complex<double> acc{};
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          const double ph = sign * 2.0 * pi *
                            (static_cast<double>((u - w / 2) * (xx - w / 2)) / w +
                             static_cast<double>((v - h / 2) * (y - h / 2)) / h);
          acc += x(xx, y) * std::polar(1.0, ph);
        }
      }
      out(u, v) = acc / std::sqrt(static_cast<double>(w) * h);
    }
  }
  return out;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("fpmforge_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace testutil
