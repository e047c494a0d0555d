#include "fpmforge/cf2d.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fpmforge/image_io.hpp"

namespace fpmforge {
namespace {

static_assert(std::endian::native == std::endian::little,
              "cf2d encoding assumes a little-endian host");

constexpr std::array<char, 4> kMagic{'C', 'F', '2', 'D'};

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FpmError(ErrorKind::MalformedInput, "truncated cf2d header");
  return v;
}

}  // namespace

void write_cf2d(std::ostream& out, const ComplexField& field) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(field.width()));
  put_u32(out, static_cast<std::uint32_t>(field.height()));
  put_u32(out, kCf2dLayoutInterleaved);
  std::vector<float> buf;
  buf.reserve(field.size() * 2);
  for (const auto& v : field.values()) {
    buf.push_back(static_cast<float>(v.real()));
    buf.push_back(static_cast<float>(v.imag()));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw FpmError(ErrorKind::Io, "failed writing cf2d payload");
}

ComplexField read_cf2d(std::istream& in, Space space) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FpmError(ErrorKind::MalformedInput, "bad cf2d magic");
  const auto width = get_u32(in);
  const auto height = get_u32(in);
  const auto layout = get_u32(in);
  if (layout != kCf2dLayoutInterleaved) {
    throw FpmError(ErrorKind::MalformedInput, "unsupported cf2d layout " + std::to_string(layout));
  }
  if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16)) {
    throw FpmError(ErrorKind::MalformedInput, "implausible cf2d dimensions");
  }
  std::vector<float> buf(static_cast<std::size_t>(width) * height * 2);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw FpmError(ErrorKind::MalformedInput, "truncated cf2d payload");
  std::vector<std::complex<double>> values(buf.size() / 2);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = {buf[2 * i], buf[2 * i + 1]};
  return ComplexField(static_cast<int>(width), static_cast<int>(height), std::move(values), space);
}

void save_cf2d(const std::filesystem::path& path, const ComplexField& field) {
  std::ostringstream out(std::ios::binary);
  write_cf2d(out, field);
  write_file_atomic(path, out.str());
}

ComplexField load_cf2d(const std::filesystem::path& path, Space space) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FpmError(ErrorKind::Io, "cannot open " + path.string());
  return read_cf2d(in, space);
}

}  // namespace fpmforge
