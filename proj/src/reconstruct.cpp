#include "fpmforge/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fpmforge/fft.hpp"
#include "fpmforge/simulator.hpp"

namespace fpmforge::recon {
namespace {

constexpr double kDivisionGuard = 1e-10;

struct Target {
  double intensity;
  bool simulated;  // target equals the simulated intensity
};

Target eq2_target(double sim, double meas, bool stray, bool valid, double eta) {
  if (!valid) return {sim, true};
  if (sim <= eta && meas <= eta) return {meas, false};
  return stray ? Target{sim, true} : Target{meas, false};
}

bool flag(const Mask& m, std::size_t i) { return !m.empty() && m[i] != 0; }
bool valid_at(const Mask& m, std::size_t i) { return m.empty() || m[i] != 0; }

void check_shapes(const Grid<double>& i_c, const Mask& stray, const Mask& valid) {
  if ((!stray.empty() && !stray.same_shape(i_c)) || (!valid.empty() && !valid.same_shape(i_c))) {
    throw FpmError(ErrorKind::InvalidArgument, "mask dimensions differ from the measurement");
  }
}

}  // namespace

void EpryParams::validate() const {
  if (iterations < 1) throw FpmError(ErrorKind::InvalidArgument, "iterations must be >= 1");
  if (!(eta > 0.0 && eta <= 1.0)) throw FpmError(ErrorKind::InvalidArgument, "eta must lie in (0, 1]");
  if (sub_factor != 1 && sub_factor != 2) throw FpmError(ErrorKind::InvalidArgument, "sub_factor must be 1 or 2");
  if (upsample < sub_factor) throw FpmError(ErrorKind::InvalidArgument, "upsample must be >= sub_factor");
  if (!(object_step > 0.0) || !(pupil_step >= 0.0)) throw FpmError(ErrorKind::InvalidArgument, "invalid step sizes");
}

ComplexField amplitude_update(const ComplexField& phi_e, const Grid<double>& i_c, const Mask& stray,
                              const Mask& valid, double eta) {
  if (!phi_e.same_shape(i_c)) throw FpmError(ErrorKind::InvalidArgument, "field and measurement differ in size");
  check_shapes(i_c, stray, valid);
  ComplexField out = phi_e;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto phi = phi_e[i];
    const Target t = eq2_target(std::norm(phi), i_c[i], flag(stray, i), valid_at(valid, i), eta);
    if (t.simulated) continue;
    const double modulus = std::sqrt(std::max(t.intensity, 0.0));
    const double mag = std::abs(phi);
    out[i] = mag > 0.0 ? phi * (modulus / mag) : std::complex<double>(modulus, 0.0);
  }
  return out;
}

ComplexField subsampled_constraint(const ComplexField& phi_fine, const Grid<double>& i_c,
                                   int sub_factor, const Mask& stray, const Mask& valid, double eta) {
  if (sub_factor < 1) throw FpmError(ErrorKind::InvalidArgument, "sub_factor must be >= 1");
  if (phi_fine.width() != i_c.width() * sub_factor || phi_fine.height() != i_c.height() * sub_factor) {
    throw FpmError(ErrorKind::InvalidArgument, "fine field must be sub_factor times the coarse grid");
  }
  if (sub_factor == 1) return amplitude_update(phi_fine, i_c, stray, valid, eta);
  check_shapes(i_c, stray, valid);
  ComplexField out = phi_fine;
  const int s = sub_factor;
  const double cells = static_cast<double>(s) * s;
  for (int cy = 0; cy < i_c.height(); ++cy) {
    for (int cx = 0; cx < i_c.width(); ++cx) {
      double sim = 0.0;
      for (int dy = 0; dy < s; ++dy) {
        for (int dx = 0; dx < s; ++dx) sim += std::norm(phi_fine(cx * s + dx, cy * s + dy));
      }
      const std::size_t ci = static_cast<std::size_t>(cy) * i_c.width() + cx;
      const Target t = eq2_target(sim, i_c[ci], flag(stray, ci), valid_at(valid, ci), eta);
      if (t.simulated) continue;
      const double target = std::max(t.intensity, 0.0);
      for (int dy = 0; dy < s; ++dy) {
        for (int dx = 0; dx < s; ++dx) {
          auto& v = out(cx * s + dx, cy * s + dy);
          v = sim > 0.0 ? v * std::sqrt(target / sim) : std::complex<double>(std::sqrt(target / cells), 0.0);
        }
      }
    }
  }
  return out;
}

ComplexField Reconstruction::object() const { return ifft2c(object_spectrum); }

double convergence_metric(const Reconstruction& recon) {
  if (recon.error_log.empty()) throw FpmError(ErrorKind::InvalidArgument, "reconstruction has no iterations");
  return recon.error_log.back();
}

Reconstruction epry_reconstruct(const EpryInput& input, const OpticsConfig& optics,
                                const EpryParams& params) {
  optics.validate();
  params.validate();
  const std::size_t count = input.images.size();
  if (count == 0) throw FpmError(ErrorKind::InvalidArgument, "no images to reconstruct");
  if (input.ks.size() != count) {
    throw FpmError(ErrorKind::InvalidArgument, "stack has " + std::to_string(count) + " images but " +
                                                   std::to_string(input.ks.size()) + " wavevectors");
  }
  if ((!input.exposures.empty() && input.exposures.size() != count) ||
      (!input.validity.empty() && input.validity.size() != count) ||
      (!input.stray.empty() && input.stray.size() != count)) {
    throw FpmError(ErrorKind::InvalidArgument, "exposure or mask list does not match the stack");
  }
  const int w = input.images.front().width();
  const int h = input.images.front().height();
  for (const auto& img : input.images) {
    if (img.width() != w || img.height() != h) throw FpmError(ErrorKind::InvalidArgument, "images differ in size");
  }

  const int s = params.sub_factor;
  const int hr_w = w * params.upsample;
  const int hr_h = h * params.upsample;
  const int fine_w = w * s;
  const int fine_h = h * s;
  const sim::SpectralGrid fine_grid{fine_w, fine_h, optics.effective_pixel_um() / s};

  // Measurements in exposure-1 units.
  std::vector<Grid<double>> meas = input.images;
  if (!input.exposures.empty()) {
    for (std::size_t i = 0; i < count; ++i) {
      const double e = input.exposures[i];
      if (!(e > 0.0)) throw FpmError(ErrorKind::InvalidArgument, "exposure must be positive");
      for (auto& v : meas[i].values()) v /= e;
    }
  }
  const Mask no_mask;
  auto stray_of = [&](std::size_t i) -> const Mask& { return input.stray.empty() ? no_mask : input.stray[i]; };
  auto valid_of = [&](std::size_t i) -> const Mask& { return input.validity.empty() ? no_mask : input.validity[i]; };
  for (std::size_t i = 0; i < count; ++i) check_shapes(meas[i], stray_of(i), valid_of(i));

  // Crop origins of each sub-aperture inside the HR spectrum.
  std::vector<std::pair<int, int>> origin(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto [sx, sy] = sim::spectrum_shift(input.ks[i], optics, fine_grid);
    const int x0 = hr_w / 2 + sx - fine_w / 2;
    const int y0 = hr_h / 2 + sy - fine_h / 2;
    if (x0 < 0 || y0 < 0 || x0 + fine_w > hr_w || y0 + fine_h > hr_h) {
      throw FpmError(ErrorKind::OutOfRange,
                     "sub-aperture of image " + std::to_string(i) + " falls outside the HR spectrum");
    }
    origin[i] = {x0, y0};
  }

  ComplexField pupil = sim::make_pupil(optics, fine_grid);
  Mask support(fine_w, fine_h, 0);
  for (std::size_t p = 0; p < pupil.size(); ++p) support[p] = pupil[p] != std::complex<double>{} ? 1 : 0;

  const std::vector<std::size_t> order = center_outward_order(input.ks);

  // Start from the spectrally up-sampled lowest-angle capture, zero phase.
  ComplexField object(hr_w, hr_h, Space::Fourier);
  {
    const std::size_t ref = order.front();
    ComplexField seed(w, h, Space::Spatial);
    for (std::size_t p = 0; p < seed.size(); ++p) seed[p] = std::sqrt(std::max(meas[ref][p], 0.0));
    fft2c_inplace(seed);
    const int x0 = hr_w / 2 - w / 2;
    const int y0 = hr_h / 2 - h / 2;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) object(x0 + x, y0 + y) = seed(x, y);
    }
  }

  Reconstruction recon;
  recon.sub_factor = s;
  recon.upsample = params.upsample;
  ComplexField crop(fine_w, fine_h, Space::Fourier);
  ComplexField psi(fine_w, fine_h, Space::Fourier);

  for (int it = 0; it < params.iterations; ++it) {
    double err_num = 0.0;
    double err_den = 0.0;
    for (std::size_t i : order) {
      const auto [x0, y0] = origin[i];
      for (int y = 0; y < fine_h; ++y) {
        for (int x = 0; x < fine_w; ++x) crop(x, y) = object(x0 + x, y0 + y);
      }
      for (std::size_t p = 0; p < psi.size(); ++p) psi[p] = crop[p] * pupil[p];

      ComplexField phi = ifft2c(psi);
      const Mask& stray = stray_of(i);
      const Mask& valid = valid_of(i);
      for (int cy = 0; cy < h; ++cy) {
        for (int cx = 0; cx < w; ++cx) {
          const std::size_t ci = static_cast<std::size_t>(cy) * w + cx;
          if (flag(stray, ci) || !valid_at(valid, ci)) continue;
          double sim = 0.0;
          for (int dy = 0; dy < s; ++dy) {
            for (int dx = 0; dx < s; ++dx) sim += std::norm(phi(cx * s + dx, cy * s + dy));
          }
          const double m = std::max(meas[i][ci], 0.0);
          const double d = std::sqrt(sim) - std::sqrt(m);
          err_num += d * d;
          err_den += m;
        }
      }
      ComplexField updated = subsampled_constraint(phi, meas[i], s, stray, valid, params.eta);
      fft2c_inplace(updated);

      double pupil_max = 0.0;
      double crop_max = 0.0;
      for (std::size_t p = 0; p < pupil.size(); ++p) {
        pupil_max = std::max(pupil_max, std::norm(pupil[p]));
        crop_max = std::max(crop_max, std::norm(crop[p]));
      }
      const double obj_gain = params.object_step / (pupil_max + kDivisionGuard);
      const double pup_gain = params.pupil_step / (crop_max + kDivisionGuard);
      for (int y = 0; y < fine_h; ++y) {
        for (int x = 0; x < fine_w; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * fine_w + x;
          const auto diff = updated[p] - psi[p];
          object(x0 + x, y0 + y) += obj_gain * std::conj(pupil[p]) * diff;
          if (params.enable_pupil_recovery) {
            pupil[p] = support[p] ? pupil[p] + pup_gain * std::conj(crop[p]) * diff : std::complex<double>{};
          }
        }
      }
    }
    if (!object.all_finite() || !pupil.all_finite()) {
      throw FpmError(ErrorKind::Diverged, "non-finite field at iteration " + std::to_string(it + 1));
    }
    recon.error_log.push_back(err_den > 0.0 ? err_num / err_den : 0.0);
    recon.iterations_run = it + 1;
  }

  // HR sample k of the raw result sits at camera coordinate k / upsample + 1 / (2 s);
  // shift by upsample / (2 s) - 1/2 HR pixels onto pixel centres.
  const double delta = params.upsample / (2.0 * s) - 0.5;
  if (delta != 0.0) {
    for (int y = 0; y < hr_h; ++y) {
      const double fy = static_cast<double>(y - hr_h / 2) / hr_h;
      for (int x = 0; x < hr_w; ++x) {
        const double fx = static_cast<double>(x - hr_w / 2) / hr_w;
        object(x, y) *= std::polar(1.0, -2.0 * std::numbers::pi * (fx + fy) * delta);
      }
    }
  }
  recon.object_spectrum = std::move(object);
  recon.pupil = std::move(pupil);
  return recon;
}

}  // namespace fpmforge::recon
