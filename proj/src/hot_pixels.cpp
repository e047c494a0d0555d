#include <algorithm>
#include <array>
#include <cmath>

#include "fpmforge/preprocess.hpp"

namespace fpmforge::prep {
namespace {

constexpr double kMadFactor = 10.0;
constexpr double kAbsoluteExcess = 0.1;

double median_of(std::array<double, 8>& v, int n) {
  std::sort(v.begin(), v.begin() + n);
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Fn>
void for_each_neighbour(int w, int h, int x, int y, Fn&& fn) {
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int nx = x + dx;
      const int ny = y + dy;
      if (nx >= 0 && ny >= 0 && nx < w && ny < h) fn(nx, ny);
    }
  }
}

}  // namespace

Mask detect_hot_pixels(const Image2D& img) {
  const int w = img.width();
  const int h = img.height();
  Mask flags(w, h, 0);
  std::array<double, 8> nb{};
  std::array<double, 8> dev{};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int n = 0;
      for_each_neighbour(w, h, x, y, [&](int nx, int ny) { nb[n++] = img(nx, ny); });
      if (n == 0) continue;
      const double med = median_of(nb, n);
      for (int i = 0; i < n; ++i) dev[i] = std::abs(nb[i] - med);
      const double mad = median_of(dev, n);
      const double excess = img(x, y) - med;
      if (excess > kMadFactor * mad && excess > kAbsoluteExcess) flags(x, y) = 1;
    }
  }
  return flags;
}

Image2D replace_hot_pixels(const Image2D& img) {
  if (img.domain() != Domain::Normalized) {
    throw FpmError(ErrorKind::InvalidArgument, "replace_hot_pixels expects a normalized image");
  }
  const Mask flags = detect_hot_pixels(img);
  Image2D out = img;
  const int w = img.width();
  const int h = img.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (flags(x, y) == 0) continue;
      double sum = 0.0;
      int count = 0;
      for_each_neighbour(w, h, x, y, [&](int nx, int ny) {
        if (flags(nx, ny) == 0) {
          sum += img(nx, ny);
          ++count;
        }
      });
      if (count > 0) out(x, y) = sum / count;
    }
  }
  return out;
}

}  // namespace fpmforge::prep
