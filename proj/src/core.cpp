#include "fpmforge/core.hpp"

#include <cmath>
#include <sstream>

namespace fpmforge {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedInput: return "malformed-input";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::DegenerateHistogram: return "degenerate-histogram";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::Diverged: return "diverged";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

bool is_valid_bit_depth(int bits) noexcept { return bits == 8 || bits == 12 || bits == 16; }

void Image2D::validate() const {
  const double hi = domain_ == Domain::Normalized ? 1.0 : full_scale();
  for (std::size_t i = 0; i < size(); ++i) {
    const double v = (*this)[i];
    if (!std::isfinite(v) || v < 0.0 || v > hi) {
      std::ostringstream msg;
      msg << "pixel " << i << " value " << v << " outside [0, " << hi << "]";
      throw FpmError(ErrorKind::MalformedInput, msg.str());
    }
  }
}

bool ComplexField::all_finite() const noexcept {
  for (const auto& v : values()) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

void OpticsConfig::validate() const {
  if (!(na_obj > 0.0 && na_obj < 1.0)) {
    throw FpmError(ErrorKind::InvalidArgument, "na_obj must lie in (0, 1)");
  }
  if (!(magnification > 0.0)) {
    throw FpmError(ErrorKind::InvalidArgument, "magnification must be positive");
  }
  if (!(camera_pixel_um > 0.0) || !(wavelength_nm > 0.0)) {
    throw FpmError(ErrorKind::InvalidArgument, "camera pixel and wavelength must be positive");
  }
  if (!is_valid_bit_depth(bit_depth)) {
    throw FpmError(ErrorKind::InvalidArgument,
                   "bit_depth must be 8, 12 or 16, got " + std::to_string(bit_depth));
  }
}

void RegionSpec::validate(int width, int height) const {
  if (rects.empty()) throw FpmError(ErrorKind::InvalidArgument, "region list is empty");
  for (const auto& r : rects) {
    if (r.w < 1 || r.h < 1 || r.x0 < 0 || r.y0 < 0 || r.x0 + r.w > width ||
        r.y0 + r.h > height) {
      std::ostringstream msg;
      msg << "region (" << r.x0 << ", " << r.y0 << ", " << r.w << ", " << r.h
          << ") outside " << width << "x" << height << " image";
      throw FpmError(ErrorKind::OutOfRange, msg.str());
    }
  }
}

}  // namespace fpmforge
