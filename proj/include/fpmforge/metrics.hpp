#pragma once

#include "fpmforge/core.hpp"

namespace fpmforge {

/// Divides raw counts by 2^bit_depth - 1. Throws MalformedInput on values
/// outside the bit-depth range or on a non-raw input.
Image2D normalize_image(const Image2D& raw, int bit_depth);

/// sqrt( sum (|a| - |b|)^2 / sum |b|^2 ). Throws UndefinedMetric when b == 0.
double amplitude_rmse(const ComplexField& a, const ComplexField& b);

/// amplitude_rmse after scaling |a| by the least-squares factor that best
/// matches |b|. Reconstructions carry an arbitrary global intensity scale.
double aligned_amplitude_rmse(const ComplexField& a, const ComplexField& b);

/// Wrapped phase difference between two fields, averaged as a unit phasor.
double mean_phase_offset(const ComplexField& a, const ComplexField& b);

}  // namespace fpmforge
