#include "fpmforge/metrics.hpp"

#include <cmath>
#include <sstream>

namespace fpmforge {

Image2D normalize_image(const Image2D& raw, int bit_depth) {
  if (raw.domain() != Domain::RawCounts) {
    throw FpmError(ErrorKind::MalformedInput, "normalize_image expects raw counts");
  }
  if (!is_valid_bit_depth(bit_depth)) {
    throw FpmError(ErrorKind::InvalidArgument, "unsupported bit depth");
  }
  const double full = static_cast<double>((1u << bit_depth) - 1u);
  Image2D out(raw.width(), raw.height(), Domain::Normalized, bit_depth);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = raw[i];
    if (!std::isfinite(v) || v < 0.0 || v > full) {
      std::ostringstream msg;
      msg << "raw value " << v << " at pixel " << i << " exceeds " << bit_depth << "-bit range";
      throw FpmError(ErrorKind::MalformedInput, msg.str());
    }
    out[i] = v / full;
  }
  return out;
}

namespace {

void require_same_shape(const ComplexField& a, const ComplexField& b) {
  if (!a.same_shape(b)) {
    throw FpmError(ErrorKind::InvalidArgument, "fields differ in dimensions");
  }
}

}  // namespace

double amplitude_rmse(const ComplexField& a, const ComplexField& b) {
  require_same_shape(a, b);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double mb = std::abs(b[i]);
    const double d = std::abs(a[i]) - mb;
    num += d * d;
    den += mb * mb;
  }
  if (den == 0.0) throw FpmError(ErrorKind::UndefinedMetric, "reference field is identically zero");
  return std::sqrt(num / den);
}

double aligned_amplitude_rmse(const ComplexField& a, const ComplexField& b) {
  require_same_shape(a, b);
  double ab = 0.0;
  double aa = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ma = std::abs(a[i]);
    ab += ma * std::abs(b[i]);
    aa += ma * ma;
  }
  const double scale = aa > 0.0 ? ab / aa : 0.0;
  ComplexField scaled = a;
  for (auto& v : scaled.values()) v *= scale;
  return amplitude_rmse(scaled, b);
}

double mean_phase_offset(const ComplexField& a, const ComplexField& b) {
  require_same_shape(a, b);
  std::complex<double> acc{};
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * std::conj(b[i]);
  return std::arg(acc);
}

}  // namespace fpmforge
