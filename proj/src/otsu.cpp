#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fpmforge/preprocess.hpp"

namespace fpmforge::prep {

int otsu_bin(double value, int levels) noexcept {
  if (!(value > 0.0)) return 0;
  const double scaled = std::floor(value * levels);
  return static_cast<int>(std::min(scaled, static_cast<double>(levels - 1)));
}

double otsu_threshold(const Image2D& normalized, int levels) {
  if (levels < 2) throw FpmError(ErrorKind::InvalidArgument, "otsu needs at least 2 levels");
  std::vector<std::int64_t> hist(static_cast<std::size_t>(levels), 0);
  for (double v : normalized.values()) ++hist[static_cast<std::size_t>(otsu_bin(v, levels))];
  if (std::count_if(hist.begin(), hist.end(), [](std::int64_t c) { return c > 0; }) < 2) {
    throw FpmError(ErrorKind::DegenerateHistogram, "image has fewer than two distinct levels");
  }

  // Between-class variance on bin indices, kept as an exact fraction:
  // (n0 * S - N * s0)^2 / (n0 * n1), up to the constant factor N^2.
  using Wide = boost::multiprecision::int256_t;
  std::int64_t total = 0;
  std::int64_t total_sum = 0;
  for (int b = 0; b < levels; ++b) {
    total += hist[b];
    total_sum += hist[b] * b;
  }

  Wide best_num = 0;
  Wide best_den = 1;
  int best_k = 0;
  std::int64_t n0 = 0;
  std::int64_t s0 = 0;
  for (int k = 0; k < levels; ++k) {
    if (k > 0) {
      n0 += hist[k - 1];
      s0 += hist[k - 1] * (k - 1);
    }
    const std::int64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const Wide diff = Wide(n0) * total_sum - Wide(total) * s0;
    const Wide num = diff * diff;
    const Wide den = Wide(n0) * n1;
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best_k = k;
    }
  }
  return static_cast<double>(best_k) / levels;
}

}  // namespace fpmforge::prep
