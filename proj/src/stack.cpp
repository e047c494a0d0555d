#include "fpmforge/stack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fpmforge {

double WaveVector::na() const noexcept { return std::hypot(sin_x, sin_y); }

std::vector<std::size_t> center_outward_order(const std::vector<WaveVector>& ks) {
  std::vector<std::size_t> order(ks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto radius2 = [&](std::size_t i) { return ks[i].sin_x * ks[i].sin_x + ks[i].sin_y * ks[i].sin_y; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = radius2(a);
    const double rb = radius2(b);
    // Mirror-symmetric LEDs differ in the last bits of their NA.
    if (std::abs(ra - rb) > 1e-12 * std::max(ra, rb)) return ra < rb;
    return std::atan2(ks[a].sin_y, ks[a].sin_x) < std::atan2(ks[b].sin_y, ks[b].sin_x);
  });
  return order;
}

}  // namespace fpmforge
