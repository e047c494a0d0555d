#pragma once

#include "fpmforge/core.hpp"

namespace fpmforge {

/// Unitary centered 2-D DFT. The zero frequency sits at (width/2, height/2),
/// matching fftshift(fft2(ifftshift(x))) / sqrt(width * height).
ComplexField fft2c(const ComplexField& field);
ComplexField ifft2c(const ComplexField& spectrum);

/// In-place variants for hot loops; `field` keeps its shape, the space tag flips.
void fft2c_inplace(ComplexField& field);
void ifft2c_inplace(ComplexField& field);

}  // namespace fpmforge
