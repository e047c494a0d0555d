#include "fpmforge/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

namespace fpmforge {
namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void no_flush(png_structp) {}

// Encodes a grayscale image held as 16-bit samples (bit_depth 16) or bytes (8).
std::string encode_gray(int width, int height, int bit_depth,
                        const std::vector<std::uint16_t>& samples) {
  std::string buffer;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw FpmError(ErrorKind::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FpmError(ErrorKind::Io, "png encoding failed");
  }
  png_set_write_fn(png, &buffer, append_bytes, no_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * (bit_depth == 16 ? 2 : 1);
  std::vector<unsigned char> row(row_bytes);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::uint16_t v = samples[static_cast<std::size_t>(y) * width + x];
      if (bit_depth == 16) {
        row[2 * x] = static_cast<unsigned char>(v >> 8);
        row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
      } else {
        row[x] = static_cast<unsigned char>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return buffer;
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FpmError(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw FpmError(ErrorKind::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FpmError(ErrorKind::Io, "cannot rename onto " + path.string() + ": " + ec.message());
}

void save_png16(const std::filesystem::path& path, const Image2D& raw) {
  if (raw.domain() != Domain::RawCounts) {
    throw FpmError(ErrorKind::InvalidArgument, "save_png16 expects raw counts");
  }
  const int shift = 16 - raw.bit_depth();
  std::vector<std::uint16_t> samples(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(std::round(raw[i]), 0.0, raw.full_scale());
    samples[i] = static_cast<std::uint16_t>(static_cast<unsigned>(v) << shift);
  }
  write_file_atomic(path, encode_gray(raw.width(), raw.height(), 16, samples));
}

void save_png8(const std::filesystem::path& path, const Grid<double>& unit) {
  std::vector<std::uint16_t> samples(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) {
    const double v = std::isfinite(unit[i]) ? std::clamp(unit[i], 0.0, 1.0) : 0.0;
    samples[i] = static_cast<std::uint16_t>(std::lround(v * 255.0));
  }
  write_file_atomic(path, encode_gray(unit.width(), unit.height(), 8, samples));
}

Image2D load_png16(const std::filesystem::path& path, int bit_depth) {
  if (!is_valid_bit_depth(bit_depth)) throw FpmError(ErrorKind::InvalidArgument, "bad bit depth");
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw FpmError(ErrorKind::Io, "cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw FpmError(ErrorKind::Io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FpmError(ErrorKind::MalformedInput, "cannot decode png " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FpmError(ErrorKind::MalformedInput, path.string() + ": expected 8/16-bit grayscale png");
  }
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> row(row_bytes);
  Image2D out(width, height, Domain::RawCounts, bit_depth);
  for (int y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < width; ++x) {
      unsigned v = depth == 16 ? (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1]
                               : static_cast<unsigned>(row[x]) << 8;
      out(x, y) = static_cast<double>(v >> (16 - bit_depth));
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace fpmforge
