#include <algorithm>
#include <cmath>
#include <sstream>

#include "fpmforge/metrics.hpp"
#include "fpmforge/preprocess.hpp"

namespace fpmforge::prep {
namespace {

std::string fmt_double(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

double region_energy(const Image2D& dark, const RegionSpec& regions) {
  double e = 0.0;
  for (const auto& r : regions.rects) {
    for (int y = r.y0; y < r.y0 + r.h; ++y) {
      for (int x = r.x0; x < r.x0 + r.w; ++x) e += dark(x, y) * dark(x, y);
    }
  }
  return e;
}

}  // namespace

PreprocessResult preprocess_stack(const CaptureStack& stack, const OpticsConfig& optics,
                                  const PreprocessParams& params) {
  optics.validate();
  if (stack.empty()) throw FpmError(ErrorKind::InvalidArgument, "empty capture stack");
  if (!(params.eta > 0.0 && params.eta < 1.0)) throw FpmError(ErrorKind::InvalidArgument, "eta must lie in (0, 1)");
  const Image2D& first = stack.captures.front().image;
  if (params.uniformity != Uniformity::None) {
    if (!stack.dark) {
      throw FpmError(ErrorKind::InvalidArgument, "uniformity step requires a dark frame");
    }
    if (!stack.dark->same_shape(first)) {
      throw FpmError(ErrorKind::InvalidArgument, "dark frame dimensions differ from the captures");
    }
  }

  const std::size_t n = stack.size();
  PreprocessResult result;
  PreprocessReport& report = result.report;
  report.images.resize(n);
  report.eta = params.eta;
  report.uniformity = to_string(params.uniformity);
  result.images.resize(n);
  result.masks.validity.resize(n);
  result.masks.stray.resize(n);
  result.masks.affected.assign(n, false);

  std::vector<bool> failed(n, false);
  auto fail = [&](std::size_t i, const std::exception& e) {
    failed[i] = true;
    report.images[i].error = e.what();
    const Image2D& img = stack.captures[i].image;
    result.images[i] = Image2D(img.width(), img.height(), Domain::Normalized, optics.bit_depth);
    result.masks.validity[i] = Mask(img.width(), img.height(), 0);
    result.masks.stray[i] = Mask(img.width(), img.height(), 0);
  };

  // Normalize, saturation masks, hot-pixel repair.
  std::size_t invalid = 0;
  std::size_t pixels = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Image2D& raw = stack.captures[i].image;
    try {
      if (!raw.same_shape(first)) throw FpmError(ErrorKind::InvalidArgument, "capture dimensions differ");
      Image2D img = normalize_image(raw, optics.bit_depth);
      result.masks.validity[i] = mark_saturation(raw, optics.bit_depth);
      if (params.hot_pixels) {
        const Mask hot = detect_hot_pixels(img);
        report.images[i].hot_pixels =
            static_cast<int>(std::count(hot.values().begin(), hot.values().end(), std::uint8_t{1}));
        img = replace_hot_pixels(img);
      }
      result.images[i] = std::move(img);
    } catch (const std::exception& e) {
      fail(i, e);
    }
    const double frac = invalid_fraction(result.masks.validity[i]);
    report.images[i].invalid_fraction = frac;
    invalid += static_cast<std::size_t>(std::lround(frac * static_cast<double>(raw.size())));
    pixels += raw.size();
  }

  std::optional<Image2D> dark;
  if (params.uniformity != Uniformity::None) {
    dark = normalize_image(*stack.dark, optics.bit_depth);
    if (params.hot_pixels) dark = replace_hot_pixels(*dark);
  }

  std::vector<bool> dark_field(n);
  std::size_t reference = n;
  for (std::size_t i = 0; i < n; ++i) {
    dark_field[i] = classify_illumination(stack.captures[i].k, optics) == Illumination::DarkField;
    if (!dark_field[i] && !failed[i] && reference == n) reference = i;
  }
  if (reference == n) reference = 0;
  report.regions = params.regions ? *params.regions : default_regions(result.images[reference]);
  report.regions.validate(first.width(), first.height());

  {
    std::vector<Image2D> usable;
    for (std::size_t i = 0; i < n; ++i) {
      if (!failed[i]) usable.push_back(result.images[i]);
    }
    if (!usable.empty()) report.threshold_bound = threshold_bound(usable);
  }

  if (params.stray_masks) {
    for (std::size_t i = 0; i < n; ++i) {
      if (failed[i]) continue;
      StrayDetection det = detect_stray_mask(result.images[i], dark_field[i], params.eta);
      result.masks.affected[i] = det.affected;
      report.images[i].affected = det.affected;
      result.masks.stray[i] = std::move(det.mask);
      for (auto& w : det.warnings) report.warnings.push_back("image " + std::to_string(i) + ": " + w);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (!failed[i]) result.masks.stray[i] = Mask(first.width(), first.height(), 0);
    }
  }

  bool weighted = params.uniformity == Uniformity::Weighted;
  if (weighted && region_energy(*dark, report.regions) == 0.0) {
    weighted = false;
    dark.reset();
    report.notes.push_back("dark frame is zero over the regions; subtraction skipped");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i] || !dark) continue;
    try {
      const double alpha = weighted ? uniformity_alpha(result.images[i], *dark, report.regions) : 1.0;
      report.images[i].alpha = alpha;
      if (alpha < 0.0) {
        report.warnings.push_back("image " + std::to_string(i) + ": anomalous negative alpha " + fmt_double(alpha));
      }
      result.images[i] = weighted_subtract(result.images[i], *dark, alpha);
    } catch (const std::exception& e) {
      fail(i, e);
    }
  }

  report.i_th = params.i_th ? *params.i_th : 0.5 * std::max(0.0, report.threshold_bound);
  if (!(report.i_th >= 0.0 && report.i_th <= 1.0)) throw FpmError(ErrorKind::InvalidArgument, "i_th must lie in [0, 1]");
  if (report.i_th > report.threshold_bound) {
    report.warnings.push_back("i_th " + fmt_double(report.i_th) + " exceeds the threshold bound " +
                              fmt_double(report.threshold_bound));
  }
  std::vector<Image2D> after;
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) continue;
    result.images[i] = apply_threshold(result.images[i], report.i_th);
    after.push_back(result.images[i]);
  }
  if (!after.empty()) report.threshold_bound_after = threshold_bound(after);

  const auto failures = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), true));
  if (2 * failures > n) {
    throw FpmError(ErrorKind::MalformedInput,
                   std::to_string(failures) + " of " + std::to_string(n) + " images failed preprocessing");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) report.warnings.push_back("image " + std::to_string(i) + " skipped: " + report.images[i].error);
  }

  report.invalid_fraction = pixels ? static_cast<double>(invalid) / static_cast<double>(pixels) : 0.0;
  result.masks.invalid_fraction = report.invalid_fraction;
  if (report.invalid_fraction > kInvalidFractionGuideline) {
    report.warnings.push_back("invalid pixel fraction " + fmt_double(report.invalid_fraction) +
                              " exceeds the 15% guideline; consider more illumination angles");
  }
  return result;
}

}  // namespace fpmforge::prep
