#include "fpmforge/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace fpmforge {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int width, int height, int sign) {
    const std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(width, height, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<std::complex<double>> scratch(static_cast<std::size_t>(width) * height);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(height, width, buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

// out[i] = in[(i + shift) mod n] along both axes.
void circular_shift(const std::vector<std::complex<double>>& in,
                    std::vector<std::complex<double>>& out, int width, int height,
                    int shift_x, int shift_y) {
  for (int y = 0; y < height; ++y) {
    const int sy = (y + shift_y) % height;
    const auto* src = in.data() + static_cast<std::size_t>(sy) * width;
    auto* dst = out.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) dst[x] = src[(x + shift_x) % width];
  }
}

void centered_transform(ComplexField& field, int sign) {
  const int w = field.width();
  const int h = field.height();
  auto& data = field.storage();
  std::vector<std::complex<double>> work(data.size());
  // ifftshift: out[i] = in[(i + n/2) mod n]
  circular_shift(data, work, w, h, w / 2, h / 2);
  fftw_plan plan = plan_cache().get(w, h, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(work.data());
  fftw_execute_dft(plan, buf, buf);
  // fftshift: out[i] = in[(i + n - n/2) mod n]
  circular_shift(work, data, w, h, w - w / 2, h - h / 2);
  const double scale = 1.0 / std::sqrt(static_cast<double>(w) * h);
  for (auto& v : data) v *= scale;
}

}  // namespace

void fft2c_inplace(ComplexField& field) {
  centered_transform(field, FFTW_FORWARD);
  field.set_space(Space::Fourier);
}

void ifft2c_inplace(ComplexField& field) {
  centered_transform(field, FFTW_BACKWARD);
  field.set_space(Space::Spatial);
}

ComplexField fft2c(const ComplexField& field) {
  ComplexField out = field;
  fft2c_inplace(out);
  return out;
}

ComplexField ifft2c(const ComplexField& spectrum) {
  ComplexField out = spectrum;
  ifft2c_inplace(out);
  return out;
}

}  // namespace fpmforge
