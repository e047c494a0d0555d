#include "fpmforge/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fpmforge/cf2d.hpp"
#include "fpmforge/image_io.hpp"
#include "fpmforge/json_util.hpp"

namespace fpmforge::app {

using nlohmann::json;

bool DatasetManifest::operator==(const DatasetManifest& o) const {
  return optics.na_obj == o.optics.na_obj && optics.magnification == o.optics.magnification &&
         optics.camera_pixel_um == o.optics.camera_pixel_um && optics.bit_depth == o.optics.bit_depth &&
         optics.wavelength_nm == o.optics.wavelength_nm && led.rows == o.led.rows && led.cols == o.led.cols &&
         led.spacing_mm == o.led.spacing_mm && led.height_mm == o.led.height_mm &&
         led.offset_x_mm == o.led.offset_x_mm && led.offset_y_mm == o.led.offset_y_mm && active == o.active &&
         images == o.images && dark_frame == o.dark_frame && ground_truth == o.ground_truth &&
         processed == o.processed;
}

std::string image_name(int row, int col) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_r%02d_c%02d.png", row, col);
  return buf;
}

std::string mask_name(int row, int col) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "mask_r%02d_c%02d.png", row, col);
  return buf;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "fpmforge-dataset";
  j["version"] = 1;
  j["wavelength_nm"] = m.optics.wavelength_nm;
  j["na_obj"] = m.optics.na_obj;
  j["magnification"] = m.optics.magnification;
  j["camera_pixel_um"] = m.optics.camera_pixel_um;
  j["bit_depth"] = m.optics.bit_depth;
  j["led"] = {{"rows", m.led.rows},
              {"cols", m.led.cols},
              {"spacing_mm", m.led.spacing_mm},
              {"height_mm", m.led.height_mm},
              {"offset_mm", {m.led.offset_x_mm, m.led.offset_y_mm}},
              {"active", {{"rows", {m.active.row_begin, m.active.row_end}},
                          {"cols", {m.active.col_begin, m.active.col_end}}}}};
  json images = json::array();
  for (const auto& im : m.images) {
    json e = {{"file", im.file}, {"row", im.row}, {"col", im.col}, {"exposure", im.exposure}};
    if (!im.mask.empty()) e["mask"] = im.mask;
    images.push_back(std::move(e));
  }
  j["images"] = std::move(images);
  j["dark_frame"] = m.dark_frame.empty() ? json(nullptr) : json(m.dark_frame);
  j["ground_truth"] = m.ground_truth.empty() ? json(nullptr) : json(m.ground_truth);
  j["processed"] = m.processed;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  const json j = parse_json_document(text, "manifest");
  JsonReader r(j, "manifest");
  r.allow({"format", "version", "wavelength_nm", "na_obj", "magnification", "camera_pixel_um", "bit_depth",
           "led", "images", "dark_frame", "ground_truth", "processed"});
  if (r.get_or<std::string>("format", "fpmforge-dataset") != "fpmforge-dataset") {
    throw FpmError(ErrorKind::MalformedInput, "manifest: unknown format");
  }
  if (r.get_or<int>("version", 1) != 1) throw FpmError(ErrorKind::MalformedInput, "manifest: unsupported version");
  DatasetManifest m;
  m.optics.wavelength_nm = r.get<double>("wavelength_nm");
  m.optics.na_obj = r.get<double>("na_obj");
  m.optics.magnification = r.get<double>("magnification");
  m.optics.camera_pixel_um = r.get<double>("camera_pixel_um");
  m.optics.bit_depth = r.get<int>("bit_depth");

  JsonReader led = r.object("led");
  led.allow({"rows", "cols", "spacing_mm", "height_mm", "offset_mm", "active"});
  m.led.rows = led.get<int>("rows");
  m.led.cols = led.get<int>("cols");
  m.led.spacing_mm = led.get<double>("spacing_mm");
  m.led.height_mm = led.get<double>("height_mm");
  const auto offset = led.get_or<std::vector<double>>("offset_mm", {0.0, 0.0});
  if (offset.size() != 2) throw FpmError(ErrorKind::MalformedInput, "manifest.led.offset_mm: expected [x, y]");
  m.led.offset_x_mm = offset[0];
  m.led.offset_y_mm = offset[1];
  JsonReader active = led.object("active");
  active.allow({"rows", "cols"});
  const auto rows = active.get<std::vector<int>>("rows");
  const auto cols = active.get<std::vector<int>>("cols");
  if (rows.size() != 2 || cols.size() != 2) {
    throw FpmError(ErrorKind::MalformedInput, "manifest.led.active: expected [begin, end) pairs");
  }
  m.active = {rows[0], rows[1], cols[0], cols[1]};

  const json& images = r.at("images");
  if (!images.is_array()) throw FpmError(ErrorKind::MalformedInput, "manifest.images: expected an array");
  for (std::size_t i = 0; i < images.size(); ++i) {
    JsonReader e(images[i], "manifest.images[" + std::to_string(i) + "]");
    e.allow({"file", "row", "col", "exposure", "mask"});
    ManifestImage im;
    im.file = e.get<std::string>("file");
    im.row = e.get<int>("row");
    im.col = e.get<int>("col");
    im.exposure = e.get_or<double>("exposure", 1.0);
    im.mask = e.get_or<std::string>("mask", "");
    m.images.push_back(std::move(im));
  }
  m.dark_frame = r.get_or<std::string>("dark_frame", "");
  m.ground_truth = r.get_or<std::string>("ground_truth", "");
  m.processed = r.get_or<bool>("processed", false);
  m.optics.validate();
  m.led.validate();
  return m;
}

void validate_manifest(const DatasetManifest& m, const std::filesystem::path& dir) {
  auto require = [&](const std::string& name) {
    if (!std::filesystem::exists(dir / name)) {
      throw FpmError(ErrorKind::Io, "dataset file missing: " + (dir / name).string());
    }
  };
  if (m.active.empty() || m.active.row_begin < 0 || m.active.col_begin < 0 || m.active.row_end > m.led.rows ||
      m.active.col_end > m.led.cols) {
    throw FpmError(ErrorKind::MalformedInput, "manifest: active LED range outside the matrix");
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& im : m.images) {
    if (im.row < m.active.row_begin || im.row >= m.active.row_end || im.col < m.active.col_begin ||
        im.col >= m.active.col_end) {
      throw FpmError(ErrorKind::MalformedInput, "manifest: image " + im.file + " uses an inactive LED");
    }
    if (!seen.emplace(im.row, im.col).second) {
      throw FpmError(ErrorKind::MalformedInput, "manifest: duplicate LED (" + std::to_string(im.row) + ", " +
                                                    std::to_string(im.col) + ")");
    }
    if (!(im.exposure > 0.0)) throw FpmError(ErrorKind::MalformedInput, "manifest: exposure must be positive");
    require(im.file);
    if (!im.mask.empty()) require(im.mask);
  }
  const auto expected = static_cast<std::size_t>(m.active.row_end - m.active.row_begin) *
                        static_cast<std::size_t>(m.active.col_end - m.active.col_begin);
  if (m.images.size() != expected) {
    throw FpmError(ErrorKind::MalformedInput, "manifest lists " + std::to_string(m.images.size()) +
                                                  " images for " + std::to_string(expected) + " active LEDs");
  }
  if (!m.dark_frame.empty()) require(m.dark_frame);
  if (!m.ground_truth.empty()) require(m.ground_truth);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FpmError(ErrorKind::Io, "cannot open " + (dir / "manifest.json").string());
  std::stringstream buf;
  buf << in.rdbuf();
  Dataset ds;
  ds.dir = dir;
  ds.manifest = manifest_from_json(buf.str());
  validate_manifest(ds.manifest, dir);
  const int bits = ds.manifest.optics.bit_depth;
  for (const auto& im : ds.manifest.images) {
    Capture cap;
    cap.image = load_png16(dir / im.file, bits);
    cap.led_row = im.row;
    cap.led_col = im.col;
    cap.k = ds.manifest.led.wavevector(im.row, im.col);
    cap.exposure = im.exposure;
    if (!ds.stack.empty() && !cap.image.same_shape(ds.stack.captures.front().image)) {
      throw FpmError(ErrorKind::MalformedInput, im.file + ": dimensions differ from the first image");
    }
    ds.stack.captures.push_back(std::move(cap));
    if (!im.mask.empty()) {
      const Image2D code = load_png16(dir / im.mask, 8);
      Mask valid(code.width(), code.height(), 1);
      Mask stray(code.width(), code.height(), 0);
      for (std::size_t p = 0; p < code.size(); ++p) {
        const auto c = static_cast<unsigned>(code[p]);
        valid[p] = (c & kMaskInvalid) ? 0 : 1;
        stray[p] = (c & kMaskStray) ? 1 : 0;
      }
      ds.validity.push_back(std::move(valid));
      ds.stray.push_back(std::move(stray));
    }
  }
  if (!ds.validity.empty() && ds.validity.size() != ds.stack.size()) {
    throw FpmError(ErrorKind::MalformedInput, "manifest: masks must be given for every image or none");
  }
  if (!ds.manifest.dark_frame.empty()) ds.stack.dark = load_png16(dir / ds.manifest.dark_frame, bits);
  if (!ds.manifest.ground_truth.empty()) ds.truth = load_cf2d(dir / ds.manifest.ground_truth);
  return ds;
}

}  // namespace fpmforge::app
