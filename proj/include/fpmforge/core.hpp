#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpmforge {

enum class ErrorKind {
  MalformedInput,
  InvalidArgument,
  UndefinedMetric,
  DegenerateHistogram,
  Degenerate,
  OutOfRange,
  Diverged,
  Io,
};

const char* to_string(ErrorKind kind);

class FpmError : public std::runtime_error {
 public:
  FpmError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Row-major 2-D grid. (x, y) addresses column x of row y.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw FpmError(ErrorKind::InvalidArgument,
                     "grid dimensions must be >= 1, got " + std::to_string(width) + "x" +
                         std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Grid(int width, int height, std::vector<T> values) : Grid(width, height) {
    if (values.size() != data_.size()) {
      throw FpmError(ErrorKind::InvalidArgument, "grid value count does not match dimensions");
    }
    data_ = std::move(values);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool same_shape(const auto& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Per-pixel flags; 0 or 1.
using Mask = Grid<std::uint8_t>;

enum class Domain { RawCounts, Normalized };

/// Real-valued intensity image. Raw counts live in [0, 2^bit_depth - 1];
/// normalized images live in [0, 1].
class Image2D : public Grid<double> {
 public:
  Image2D() = default;
  Image2D(int width, int height, Domain domain, int bit_depth = 16, double fill = 0.0)
      : Grid<double>(width, height, fill), domain_(domain), bit_depth_(bit_depth) {}
  Image2D(int width, int height, std::vector<double> values, Domain domain, int bit_depth = 16)
      : Grid<double>(width, height, std::move(values)), domain_(domain), bit_depth_(bit_depth) {}

  Domain domain() const noexcept { return domain_; }
  int bit_depth() const noexcept { return bit_depth_; }
  double full_scale() const noexcept { return static_cast<double>((1u << bit_depth_) - 1u); }

  /// Throws MalformedInput if any value violates the domain range.
  void validate() const;

 private:
  Domain domain_ = Domain::Normalized;
  int bit_depth_ = 16;
};

enum class Space { Spatial, Fourier };

class ComplexField : public Grid<std::complex<double>> {
 public:
  ComplexField() = default;
  ComplexField(int width, int height, Space space)
      : Grid<std::complex<double>>(width, height), space_(space) {}
  ComplexField(int width, int height, std::vector<std::complex<double>> values, Space space)
      : Grid<std::complex<double>>(width, height, std::move(values)), space_(space) {}

  Space space() const noexcept { return space_; }
  void set_space(Space s) noexcept { space_ = s; }

  bool all_finite() const noexcept;

 private:
  Space space_ = Space::Spatial;
};

struct OpticsConfig {
  double na_obj = 0.1;
  double magnification = 4.0;
  double camera_pixel_um = 3.75;
  int bit_depth = 8;
  double wavelength_nm = 631.13;

  double wavelength_um() const noexcept { return wavelength_nm * 1e-3; }
  double effective_pixel_um() const noexcept { return camera_pixel_um / magnification; }
  void validate() const;
};

struct Rect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  bool operator==(const Rect&) const = default;
};

struct RegionSpec {
  std::vector<Rect> rects;

  /// Throws OutOfRange unless every rectangle is non-empty and inside the image.
  void validate(int width, int height) const;
};

bool is_valid_bit_depth(int bits) noexcept;

}  // namespace fpmforge
