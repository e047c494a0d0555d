#pragma once

#include <vector>

#include "fpmforge/core.hpp"
#include "fpmforge/stack.hpp"

namespace fpmforge::recon {

struct EpryParams {
  int iterations = 30;
  double eta = 0.1;
  int sub_factor = 1;
  /// HR grid size relative to the captures.
  int upsample = 4;
  double object_step = 1.0;
  double pupil_step = 1.0;
  bool enable_pupil_recovery = true;

  void validate() const;
};

/// Modified amplitude constraint at camera resolution. Per pixel the target
/// intensity is the measurement when both simulated and measured intensities
/// are at most `eta`; otherwise stray pixels (m = 1) keep the simulated
/// intensity and the rest take the measurement. Invalid pixels keep the
/// simulation. The phase of `phi_e` is preserved (zero where phi_e = 0), and
/// pixels whose target is the simulated intensity are returned unchanged.
ComplexField amplitude_update(const ComplexField& phi_e, const Grid<double>& i_c, const Mask& stray,
                              const Mask& valid, double eta);

/// Same constraint applied to `sub_factor` x `sub_factor` blocks of a finer
/// field: the block-summed intensity is compared with the coarse measurement
/// and every fine pixel in the block is scaled by the same factor.
ComplexField subsampled_constraint(const ComplexField& phi_fine, const Grid<double>& i_c_coarse,
                                   int sub_factor, const Mask& stray, const Mask& valid, double eta);

struct EpryInput {
  std::vector<Grid<double>> images;  // normalized intensities
  std::vector<WaveVector> ks;
  std::vector<double> exposures;     // empty = all 1
  std::vector<Mask> validity;        // empty = all valid
  std::vector<Mask> stray;           // empty = no stray masks
};

struct Reconstruction {
  /// HR object spectrum, registered so HR sample k sits at the centre of HR
  /// pixel k when camera pixels are tiled by `upsample` HR pixels.
  ComplexField object_spectrum;
  ComplexField pupil;
  std::vector<double> error_log;
  int iterations_run = 0;
  int sub_factor = 1;
  int upsample = 1;

  ComplexField object() const;
};

Reconstruction epry_reconstruct(const EpryInput& input, const OpticsConfig& optics,
                                const EpryParams& params);

/// Last logged data-fidelity value.
double convergence_metric(const Reconstruction& recon);

}  // namespace fpmforge::recon
