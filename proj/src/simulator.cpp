#include "fpmforge/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "fpmforge/fft.hpp"

namespace fpmforge::sim {
namespace {

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

enum Salt : std::uint64_t { kReadNoise = 1, kDarkFrame = 2, kHotPixels = 3, kExposure = 4, kStray = 5 };

double quantize(double counts, double full, bool clip) {
  double v = std::round(counts);
  if (clip) v = std::clamp(v, 0.0, full);
  return v;
}

}  // namespace

void LedGeometry::validate() const {
  if (rows < 1 || cols < 1) throw FpmError(ErrorKind::InvalidArgument, "LED matrix must be non-empty");
  if (!(spacing_mm > 0.0) || !(height_mm > 0.0)) {
    throw FpmError(ErrorKind::InvalidArgument, "LED spacing and height must be positive");
  }
}

std::pair<double, double> LedGeometry::lateral_mm(int row, int col) const noexcept {
  return {(col - cols / 2) * spacing_mm + offset_x_mm, (row - rows / 2) * spacing_mm + offset_y_mm};
}

WaveVector LedGeometry::wavevector(int row, int col) const noexcept {
  const auto [dx, dy] = lateral_mm(row, col);
  const double r = std::sqrt(dx * dx + dy * dy + height_mm * height_mm);
  return {-dx / r, -dy / r};
}

LedRange centered_range(const LedGeometry& geom, int side) {
  geom.validate();
  if (side < 1 || side > std::min(geom.rows, geom.cols)) {
    throw FpmError(ErrorKind::OutOfRange, "active LED block does not fit the matrix");
  }
  const int r0 = std::clamp(geom.rows / 2 - side / 2, 0, geom.rows - side);
  const int c0 = std::clamp(geom.cols / 2 - side / 2, 0, geom.cols - side);
  return {r0, r0 + side, c0, c0 + side};
}

std::vector<LedIllumination> led_wavevectors(const LedGeometry& geom, const LedRange& active) {
  geom.validate();
  if (active.empty()) throw FpmError(ErrorKind::InvalidArgument, "empty active LED range");
  if (active.row_begin < 0 || active.col_begin < 0 || active.row_end > geom.rows ||
      active.col_end > geom.cols) {
    throw FpmError(ErrorKind::OutOfRange, "active LED range outside the matrix");
  }
  std::vector<LedIllumination> leds;
  std::vector<WaveVector> ks;
  for (int r = active.row_begin; r < active.row_end; ++r) {
    for (int c = active.col_begin; c < active.col_end; ++c) {
      const WaveVector k = geom.wavevector(r, c);
      leds.push_back({r, c, r * geom.cols + c, k});
      ks.push_back(k);
    }
  }
  std::vector<LedIllumination> ordered;
  ordered.reserve(leds.size());
  for (std::size_t i : center_outward_order(ks)) ordered.push_back(leds[i]);
  return ordered;
}

std::pair<double, double> pupil_radius_px(const OpticsConfig& optics, const SpectralGrid& grid) {
  const double cutoff = optics.na_obj / optics.wavelength_um();
  return {cutoff / grid.df_x(), cutoff / grid.df_y()};
}

ComplexField make_pupil(const OpticsConfig& optics, const SpectralGrid& grid, double defocus_rad) {
  optics.validate();
  if (grid.width < 1 || grid.height < 1 || !(grid.pixel_um > 0.0)) {
    throw FpmError(ErrorKind::InvalidArgument, "invalid pupil grid");
  }
  const auto [rx, ry] = pupil_radius_px(optics, grid);
  if (rx > grid.width / 2 || ry > grid.height / 2) {
    std::ostringstream msg;
    msg << "pupil radius " << rx << " px exceeds the grid's Nyquist extent";
    throw FpmError(ErrorKind::OutOfRange, msg.str());
  }
  ComplexField pupil(grid.width, grid.height, Space::Fourier);
  const double cutoff = optics.na_obj / optics.wavelength_um();
  const double cutoff2 = cutoff * cutoff;
  for (int y = 0; y < grid.height; ++y) {
    const double fy = (y - grid.height / 2) * grid.df_y();
    for (int x = 0; x < grid.width; ++x) {
      const double fx = (x - grid.width / 2) * grid.df_x();
      const double rho2 = fx * fx + fy * fy;
      if (rho2 <= cutoff2) {
        const double phase = cutoff2 > 0.0 ? defocus_rad * rho2 / cutoff2 : 0.0;
        pupil(x, y) = std::polar(1.0, phase);
      }
    }
  }
  return pupil;
}

std::pair<int, int> spectrum_shift(const WaveVector& k, const OpticsConfig& optics,
                                   const SpectralGrid& grid) {
  const double lambda = optics.wavelength_um();
  return {static_cast<int>(std::lround(k.sin_x / lambda / grid.df_x())),
          static_cast<int>(std::lround(k.sin_y / lambda / grid.df_y()))};
}

Grid<double> forward_intensity(const ComplexField& object_hr, const ComplexField& pupil,
                               const WaveVector& k, const OpticsConfig& optics, int down_factor) {
  const int n_x = object_hr.width();
  const int n_y = object_hr.height();
  if (!pupil.same_shape(object_hr)) {
    throw FpmError(ErrorKind::InvalidArgument, "pupil must match the HR object grid");
  }
  if (down_factor < 1 || n_x % down_factor != 0 || n_y % down_factor != 0) {
    throw FpmError(ErrorKind::InvalidArgument, "down_factor must divide the HR grid");
  }
  const SpectralGrid grid{n_x, n_y,
                          optics.effective_pixel_um() / static_cast<double>(down_factor)};
  const auto [sx, sy] = spectrum_shift(k, optics, grid);
  const ComplexField spectrum = fft2c(object_hr);

  ComplexField field(n_x, n_y, Space::Fourier);
  for (int y = 0; y < n_y; ++y) {
    for (int x = 0; x < n_x; ++x) {
      const auto p = pupil(x, y);
      if (p == std::complex<double>{}) continue;
      const int u = x + sx;
      const int v = y + sy;
      if (u < 0 || v < 0 || u >= n_x || v >= n_y) {
        throw FpmError(ErrorKind::OutOfRange, "illumination shifts the sub-aperture outside the HR spectrum");
      }
      field(x, y) = spectrum(u, v) * p;
    }
  }
  ifft2c_inplace(field);

  const int w = n_x / down_factor;
  const int h = n_y / down_factor;
  Grid<double> binned(w, h);
  for (int y = 0; y < n_y; ++y) {
    for (int x = 0; x < n_x; ++x) binned(x / down_factor, y / down_factor) += std::norm(field(x, y));
  }
  return binned;
}

Image2D forward_capture(const ComplexField& object_hr, const ComplexField& pupil,
                        const WaveVector& k, const OpticsConfig& optics, int down_factor,
                        double exposure) {
  optics.validate();
  const Grid<double> intensity = forward_intensity(object_hr, pupil, k, optics, down_factor);
  Image2D out(intensity.width(), intensity.height(), Domain::RawCounts, optics.bit_depth);
  const double full = out.full_scale();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = quantize(intensity[i] * exposure * full, full, true);
  return out;
}

bool StrayBlob::contains(int x, int y) const noexcept {
  const double dx = x - cx;
  const double dy = y - cy;
  return dx * dx + dy * dy <= radius_px * radius_px;
}

void NoiseSpec::validate(std::size_t stack_size, int width, int height) const {
  if (!(gaussian_sigma >= 0.0)) throw FpmError(ErrorKind::InvalidArgument, "gaussian_sigma must be >= 0");
  if (dark_offset && (dark_offset->width() != width || dark_offset->height() != height)) {
    throw FpmError(ErrorKind::InvalidArgument, "dark_offset does not match capture dimensions");
  }
  for (const auto& b : stray_blobs) {
    if (b.image_index >= stack_size) {
      throw FpmError(ErrorKind::OutOfRange,
                     "stray blob image index " + std::to_string(b.image_index) + " out of range");
    }
    if (!(b.peak > 0.0 && b.peak <= 1.0)) {
      throw FpmError(ErrorKind::InvalidArgument, "stray blob peak must lie in (0, 1]");
    }
  }
  if (hot_pixel_count < 0) throw FpmError(ErrorKind::InvalidArgument, "negative hot pixel count");
  if (dark_exposures < 1) throw FpmError(ErrorKind::InvalidArgument, "dark_exposures must be >= 1");
}

CaptureStack inject_noise(const CaptureStack& stack, const NoiseSpec& spec) {
  if (stack.empty()) throw FpmError(ErrorKind::InvalidArgument, "empty capture stack");
  const Image2D& first = stack.captures.front().image;
  const int w = first.width();
  const int h = first.height();
  spec.validate(stack.size(), w, h);

  std::vector<std::size_t> hot_sites;
  if (spec.hot_pixel_count > 0) {
    auto rng = substream(spec.seed, 0, kHotPixels);
    std::uniform_int_distribution<std::size_t> pick(0, first.size() - 1);
    for (int i = 0; i < spec.hot_pixel_count; ++i) hot_sites.push_back(pick(rng));
  }

  CaptureStack out = stack;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Capture& cap = out.captures[i];
    if (!cap.image.same_shape(first)) {
      throw FpmError(ErrorKind::InvalidArgument, "captures differ in dimensions");
    }
    const double full = cap.image.full_scale();
    auto rng = substream(spec.seed, i, kReadNoise);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double add = 0.0;
        if (spec.dark_offset) add += (*spec.dark_offset)(x, y) * cap.exposure;
        if (spec.gaussian_sigma > 0.0) add += spec.gaussian_sigma * gauss(rng);
        cap.image(x, y) += add * full;
      }
    }
    for (const auto& blob : spec.stray_blobs) {
      if (blob.image_index != i) continue;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (blob.contains(x, y)) cap.image(x, y) += blob.peak * full;
        }
      }
    }
    for (std::size_t site : hot_sites) cap.image[site] += spec.hot_pixel_peak * full;
    for (auto& v : cap.image.values()) v = quantize(v, full, spec.clip);
  }

  Image2D dark(w, h, Domain::RawCounts, first.bit_depth());
  {
    const double full = dark.full_scale();
    auto rng = substream(spec.seed, 0, kDarkFrame);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> acc(dark.size(), 0.0);
    for (int e = 0; e < spec.dark_exposures; ++e) {
      for (std::size_t p = 0; p < acc.size(); ++p) {
        double v = spec.dark_offset ? (*spec.dark_offset)[p] : 0.0;
        if (spec.gaussian_sigma > 0.0) v += spec.gaussian_sigma * gauss(rng);
        acc[p] += v;
      }
    }
    for (std::size_t p = 0; p < acc.size(); ++p) dark[p] = acc[p] / spec.dark_exposures * full;
    for (std::size_t site : hot_sites) dark[site] += spec.hot_pixel_peak * full;
    for (auto& v : dark.values()) v = quantize(v, full, true);
  }
  out.dark = std::move(dark);
  return out;
}

ComplexField make_phantom(int size) {
  if (size < 16) throw FpmError(ErrorKind::InvalidArgument, "phantom size must be >= 16");
  const double s = size / 256.0;
  auto px = [s](double v) { return static_cast<int>(std::lround(v * s)); };
  Grid<double> amp(size, size, 0.1);
  auto fill = [&](int x0, int y0, int x1, int y1) {
    for (int y = std::max(0, y0); y < std::min(size, y1); ++y) {
      for (int x = std::max(0, x0); x < std::min(size, x1); ++x) amp(x, y) = 1.0;
    }
  };
  // Bar groups: (origin x, origin y, period); vertical triplet then horizontal triplet.
  struct Group { double x, y, period; };
  constexpr Group groups[] = {{68, 68, 16}, {68, 116, 12}, {144, 116, 8}, {68, 152, 6}};
  for (const auto& g : groups) {
    const int p = std::max(2, px(g.period));
    const int bar = std::max(1, p / 2);
    const int len = 5 * p / 2;
    const int x0 = px(g.x);
    const int y0 = px(g.y);
    for (int j = 0; j < 3; ++j) fill(x0 + j * p, y0, x0 + j * p + bar, y0 + len);
    const int hx = x0 + len + std::max(2, p / 2);
    for (int j = 0; j < 3; ++j) fill(hx, y0 + j * p, hx + len, y0 + j * p + bar);
  }
  fill(px(124), px(152), px(188), px(160));
  fill(px(124), px(168), px(156), px(188));

  struct Blob { double x, y, sigma; };
  constexpr Blob blobs[] = {{0.62, 0.35, 0.08}, {0.39, 0.66, 0.10}, {0.50, 0.50, 0.16}, {0.23, 0.23, 0.06}};
  Grid<double> phase(size, size);
  double lo = 1e300;
  double hi = -1e300;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double v = 0.0;
      for (const auto& b : blobs) {
        const double dx = x - b.x * size;
        const double dy = y - b.y * size;
        const double sg = b.sigma * size;
        v += std::exp(-(dx * dx + dy * dy) / (2.0 * sg * sg));
      }
      phase(x, y) = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  ComplexField field(size, size, Space::Spatial);
  for (std::size_t i = 0; i < field.size(); ++i) field[i] = std::polar(amp[i], (phase[i] - lo) / (hi - lo));
  return field;
}

Mask aperture_coverage(const OpticsConfig& optics, const SpectralGrid& grid,
                       const std::vector<WaveVector>& ks) {
  const ComplexField pupil = make_pupil(optics, grid);
  Mask cover(grid.width, grid.height, 0);
  for (const auto& k : ks) {
    const auto [sx, sy] = spectrum_shift(k, optics, grid);
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        if (pupil(x, y) == std::complex<double>{}) continue;
        const int u = x + sx;
        const int v = y + sy;
        if (u >= 0 && v >= 0 && u < grid.width && v < grid.height) cover(u, v) = 1;
      }
    }
  }
  return cover;
}

ComplexField band_limit(const ComplexField& spatial, const Mask& support) {
  if (!support.same_shape(spatial)) throw FpmError(ErrorKind::InvalidArgument, "support shape mismatch");
  ComplexField spectrum = fft2c(spatial);
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (support[i] == 0) spectrum[i] = {};
  }
  return ifft2c(spectrum);
}

void SimulationConfig::validate() const {
  optics.validate();
  led.validate();
  if (hr_size < 16) throw FpmError(ErrorKind::InvalidArgument, "hr_size must be >= 16");
  if (down_factor < 1 || hr_size % down_factor != 0) {
    throw FpmError(ErrorKind::InvalidArgument, "down_factor must divide hr_size");
  }
  if (!(brightness > 0.0)) throw FpmError(ErrorKind::InvalidArgument, "brightness must be positive");
  if (!(exposure_jitter >= 0.0 && exposure_jitter < 1.0)) {
    throw FpmError(ErrorKind::InvalidArgument, "exposure_jitter must lie in [0, 1)");
  }
  if (!(noise.stray_fraction >= 0.0 && noise.stray_fraction <= 1.0)) {
    throw FpmError(ErrorKind::InvalidArgument, "stray_fraction must lie in [0, 1]");
  }
  if (noise.stray_radius_min > noise.stray_radius_max || noise.stray_peak_min > noise.stray_peak_max) {
    throw FpmError(ErrorKind::InvalidArgument, "stray radius/peak ranges are inverted");
  }
}

SpectralGrid hr_grid(const SimulationConfig& config) {
  return {config.hr_size, config.hr_size,
          config.optics.effective_pixel_um() / static_cast<double>(config.down_factor)};
}

SimulatedDataset simulate_dataset(const SimulationConfig& config) {
  config.validate();
  SimulatedDataset data;
  data.leds = led_wavevectors(config.led, centered_range(config.led, config.active_side));
  const SpectralGrid grid = hr_grid(config);
  std::vector<WaveVector> ks;
  for (const auto& led : data.leds) ks.push_back(led.k);

  data.truth = band_limit(make_phantom(config.hr_size), aperture_coverage(config.optics, grid, ks));
  const ComplexField pupil = make_pupil(config.optics, grid, config.defocus_rad);

  auto exposure_rng = substream(config.seed, 0, kExposure);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double area = static_cast<double>(config.down_factor) * config.down_factor;
  for (const auto& led : data.leds) {
    const double exposure = 1.0 + config.exposure_jitter * unit(exposure_rng);
    Capture cap;
    cap.image = forward_capture(data.truth, pupil, led.k, config.optics, config.down_factor,
                                config.brightness / area * exposure);
    cap.led_row = led.row;
    cap.led_col = led.col;
    cap.k = led.k;
    cap.exposure = exposure;
    data.clean.captures.push_back(std::move(cap));
  }

  const int w = config.hr_size / config.down_factor;
  const int h = w;
  NoiseSpec& spec = data.noise;
  spec.seed = config.seed;
  spec.gaussian_sigma = config.noise.gaussian_sigma;
  spec.hot_pixel_count = config.noise.hot_pixel_count;
  spec.hot_pixel_peak = config.noise.hot_pixel_peak;
  if (config.noise.dark_mean != 0.0 || config.noise.dark_gradient != 0.0) {
    Image2D dark(w, h, Domain::Normalized, config.optics.bit_depth);
    const double span = std::max(1, w + h - 2);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        dark(x, y) = config.noise.dark_mean + config.noise.dark_gradient * ((x + y) / span - 0.5);
      }
    }
    spec.dark_offset = std::move(dark);
  }
  if (config.noise.stray_fraction > 0.0) {
    std::vector<std::size_t> dark_field;
    for (std::size_t i = 0; i < data.leds.size(); ++i) {
      if (data.leds[i].k.na() > config.optics.na_obj) dark_field.push_back(i);
    }
    auto rng = substream(config.seed, 0, kStray);
    std::shuffle(dark_field.begin(), dark_field.end(), rng);
    const auto count = static_cast<std::size_t>(
        std::lround(config.noise.stray_fraction * static_cast<double>(dark_field.size())));
    dark_field.resize(std::min(count, dark_field.size()));
    std::sort(dark_field.begin(), dark_field.end());
    std::uniform_real_distribution<double> radius(config.noise.stray_radius_min, config.noise.stray_radius_max);
    std::uniform_real_distribution<double> peak(config.noise.stray_peak_min, config.noise.stray_peak_max);
    for (std::size_t idx : dark_field) {
      StrayBlob blob;
      blob.image_index = idx;
      blob.radius_px = radius(rng);
      std::uniform_real_distribution<double> cx(blob.radius_px, w - 1 - blob.radius_px);
      std::uniform_real_distribution<double> cy(blob.radius_px, h - 1 - blob.radius_px);
      blob.cx = cx(rng);
      blob.cy = cy(rng);
      blob.peak = peak(rng);
      spec.stray_blobs.push_back(blob);
    }
  }
  data.stack = inject_noise(data.clean, spec);
  return data;
}

}  // namespace fpmforge::sim
