#include "fpmforge/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "fpmforge/metrics.hpp"

namespace fpmforge::prep {

SamplingReport check_sampling(const OpticsConfig& optics, double synthetic_na) {
  optics.validate();
  if (!(synthetic_na > 0.0)) throw FpmError(ErrorKind::InvalidArgument, "synthetic NA must be positive");
  SamplingReport r;
  r.effective_pixel_um = optics.effective_pixel_um();
  r.nyquist_raw_um = optics.wavelength_um() / (2.0 * optics.na_obj);
  r.nyquist_synthetic_um = optics.wavelength_um() / (2.0 * synthetic_na);
  r.ok_raw = r.effective_pixel_um <= r.nyquist_raw_um;
  r.ok_synthetic = r.effective_pixel_um <= r.nyquist_synthetic_um;
  int sub = 1;
  while (r.effective_pixel_um / sub > r.nyquist_synthetic_um) sub *= 2;
  r.recommended_subfactor = sub;
  return r;
}

Mask mark_saturation(const Image2D& raw, int bit_depth) {
  const double full = static_cast<double>((1u << bit_depth) - 1u);
  Mask valid(raw.width(), raw.height(), 1);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] >= full || raw[i] <= 0.0) valid[i] = 0;
  }
  return valid;
}

double invalid_fraction(const Mask& validity) noexcept {
  if (validity.empty()) return 0.0;
  const auto bad = std::count(validity.values().begin(), validity.values().end(), std::uint8_t{0});
  return static_cast<double>(bad) / static_cast<double>(validity.size());
}

Illumination classify_illumination(const WaveVector& k, const OpticsConfig& optics) {
  return k.na() <= optics.na_obj ? Illumination::BrightField : Illumination::DarkField;
}

StrayDetection detect_stray_mask(const Image2D& img, bool is_dark_field, double eta) {
  StrayDetection out;
  out.mask = Mask(img.width(), img.height(), 0);
  if (!is_dark_field) return out;
  const auto bright = std::count_if(img.values().begin(), img.values().end(),
                                    [eta](double v) { return v > eta; });
  out.affected = static_cast<double>(bright) / static_cast<double>(img.size()) > kAffectedPixelFraction;
  if (!out.affected) return out;

  double level = 0.0;
  try {
    level = otsu_threshold(img);
  } catch (const FpmError& e) {
    if (e.kind() != ErrorKind::DegenerateHistogram) throw;
    out.affected = false;
    out.warnings.push_back(std::string("stray mask skipped: ") + e.what());
    return out;
  }
  const int k = static_cast<int>(std::lround(level * 256.0));
  std::size_t marked = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (otsu_bin(img[i], 256) >= k) {
      out.mask[i] = 1;
      ++marked;
    }
  }
  if (2 * marked > img.size()) {
    std::fill(out.mask.values().begin(), out.mask.values().end(), std::uint8_t{0});
    out.warnings.push_back("stray mask rejected: bright class covers more than half the image");
  }
  return out;
}

double uniformity_alpha(const Image2D& measured, const Image2D& dark, const RegionSpec& regions) {
  if (!measured.same_shape(dark)) throw FpmError(ErrorKind::InvalidArgument, "image and dark frame differ in size");
  regions.validate(measured.width(), measured.height());
  double cross = 0.0;
  double energy = 0.0;
  for (const auto& r : regions.rects) {
    for (int y = r.y0; y < r.y0 + r.h; ++y) {
      for (int x = r.x0; x < r.x0 + r.w; ++x) {
        cross += measured(x, y) * dark(x, y);
        energy += dark(x, y) * dark(x, y);
      }
    }
  }
  // Both per-region averages share the 1 / region-count factor.
  if (energy == 0.0) throw FpmError(ErrorKind::Degenerate, "dark frame is zero over every region");
  return cross / energy;
}

Image2D weighted_subtract(const Image2D& measured, const Image2D& dark, double alpha) {
  if (!measured.same_shape(dark)) throw FpmError(ErrorKind::InvalidArgument, "image and dark frame differ in size");
  Image2D out = measured;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(measured[i] - alpha * dark[i], 0.0, 1.0);
  return out;
}

double threshold_bound(const std::vector<Image2D>& stack) {
  if (stack.empty()) throw FpmError(ErrorKind::InvalidArgument, "threshold bound of an empty stack");
  double max_sum = 0.0;
  double std_sum = 0.0;
  for (const auto& img : stack) {
    double peak = img[0];
    double mean = 0.0;
    for (double v : img.values()) {
      peak = std::max(peak, v);
      mean += v;
    }
    mean /= static_cast<double>(img.size());
    double var = 0.0;
    for (double v : img.values()) var += (v - mean) * (v - mean);
    max_sum += peak;
    std_sum += std::sqrt(var / static_cast<double>(img.size()));
  }
  const double n = static_cast<double>(stack.size());
  return max_sum / n - std_sum / n;
}

Image2D apply_threshold(const Image2D& img, double i_th) {
  if (!(i_th >= 0.0 && i_th <= 1.0)) throw FpmError(ErrorKind::InvalidArgument, "i_th must lie in [0, 1]");
  Image2D out = img;
  for (auto& v : out.values()) {
    if (v < i_th) v = 0.0;
  }
  return out;
}

RegionSpec default_regions(const Image2D& reference) {
  const int w = std::max(1, reference.width() / 4);
  const int h = std::max(1, reference.height() / 4);
  const std::array<Rect, 4> corners{{{0, 0, w, h},
                                     {reference.width() - w, 0, w, h},
                                     {0, reference.height() - h, w, h},
                                     {reference.width() - w, reference.height() - h, w, h}}};
  std::array<double, 4> means{};
  for (std::size_t c = 0; c < corners.size(); ++c) {
    const Rect& r = corners[c];
    double sum = 0.0;
    for (int y = r.y0; y < r.y0 + r.h; ++y) {
      for (int x = r.x0; x < r.x0 + r.w; ++x) sum += reference(x, y);
    }
    means[c] = sum;
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return means[a] < means[b]; });
  return RegionSpec{{corners[order[0]], corners[order[1]]}};
}

const char* to_string(Uniformity u) {
  switch (u) {
    case Uniformity::Weighted: return "weighted";
    case Uniformity::Direct: return "direct";
    case Uniformity::None: return "none";
  }
  return "weighted";
}

Uniformity parse_uniformity(const std::string& text) {
  if (text == "weighted") return Uniformity::Weighted;
  if (text == "direct") return Uniformity::Direct;
  if (text == "none") return Uniformity::None;
  throw FpmError(ErrorKind::InvalidArgument, "unknown uniformity mode '" + text + "'");
}

}  // namespace fpmforge::prep
