#include "fpmforge/config.hpp"

#include <fstream>
#include <sstream>

#include "fpmforge/json_util.hpp"

namespace fpmforge::app {

using nlohmann::json;

namespace {

void read_optics(const JsonReader& r, OpticsConfig& o) {
  o.wavelength_nm = r.get_or("wavelength_nm", o.wavelength_nm);
  o.na_obj = r.get_or("na_obj", o.na_obj);
  o.magnification = r.get_or("magnification", o.magnification);
  o.camera_pixel_um = r.get_or("camera_pixel_um", o.camera_pixel_um);
  o.bit_depth = r.get_or("bit_depth", o.bit_depth);
}

std::pair<double, double> read_range(const JsonReader& r, const std::string& key, std::pair<double, double> dflt) {
  if (!r.has(key)) return dflt;
  const auto v = r.get<std::vector<double>>(key);
  if (v.size() != 2 || v[0] > v[1]) throw FpmError(ErrorKind::MalformedInput, r.field(key) + ": expected [min, max]");
  return {v[0], v[1]};
}

sim::SimulationConfig read_simulate(const JsonReader& r) {
  r.allow({"wavelength_nm", "na_obj", "magnification", "camera_pixel_um", "bit_depth", "led", "active_side",
           "hr_size", "down_factor", "brightness", "exposure_jitter", "defocus_rad", "noise"});
  sim::SimulationConfig s;
  read_optics(r, s.optics);
  if (r.has("led")) {
    JsonReader led = r.object("led");
    led.allow({"rows", "cols", "spacing_mm", "height_mm", "offset_mm"});
    s.led.rows = led.get_or("rows", s.led.rows);
    s.led.cols = led.get_or("cols", s.led.cols);
    s.led.spacing_mm = led.get_or("spacing_mm", s.led.spacing_mm);
    s.led.height_mm = led.get_or("height_mm", s.led.height_mm);
    const auto off = read_range(led, "offset_mm", {s.led.offset_x_mm, s.led.offset_y_mm});
    s.led.offset_x_mm = off.first;
    s.led.offset_y_mm = off.second;
  }
  s.active_side = r.get_or("active_side", s.active_side);
  s.hr_size = r.get_or("hr_size", s.hr_size);
  s.down_factor = r.get_or("down_factor", s.down_factor);
  s.brightness = r.get_or("brightness", s.brightness);
  s.exposure_jitter = r.get_or("exposure_jitter", s.exposure_jitter);
  s.defocus_rad = r.get_or("defocus_rad", s.defocus_rad);
  if (r.has("noise")) {
    JsonReader n = r.object("noise");
    n.allow({"gaussian_sigma", "dark_mean", "dark_gradient", "stray_fraction", "stray_radius_px", "stray_peak",
             "hot_pixels", "hot_pixel_peak"});
    auto& c = s.noise;
    c.gaussian_sigma = n.get_or("gaussian_sigma", c.gaussian_sigma);
    c.dark_mean = n.get_or("dark_mean", c.dark_mean);
    c.dark_gradient = n.get_or("dark_gradient", c.dark_gradient);
    c.stray_fraction = n.get_or("stray_fraction", c.stray_fraction);
    std::tie(c.stray_radius_min, c.stray_radius_max) =
        read_range(n, "stray_radius_px", {c.stray_radius_min, c.stray_radius_max});
    std::tie(c.stray_peak_min, c.stray_peak_max) = read_range(n, "stray_peak", {c.stray_peak_min, c.stray_peak_max});
    c.hot_pixel_count = n.get_or("hot_pixels", c.hot_pixel_count);
    c.hot_pixel_peak = n.get_or("hot_pixel_peak", c.hot_pixel_peak);
  }
  return s;
}

json write_simulate(const sim::SimulationConfig& s) {
  const auto& n = s.noise;
  return {{"wavelength_nm", s.optics.wavelength_nm},
          {"na_obj", s.optics.na_obj},
          {"magnification", s.optics.magnification},
          {"camera_pixel_um", s.optics.camera_pixel_um},
          {"bit_depth", s.optics.bit_depth},
          {"led",
           {{"rows", s.led.rows},
            {"cols", s.led.cols},
            {"spacing_mm", s.led.spacing_mm},
            {"height_mm", s.led.height_mm},
            {"offset_mm", {s.led.offset_x_mm, s.led.offset_y_mm}}}},
          {"active_side", s.active_side},
          {"hr_size", s.hr_size},
          {"down_factor", s.down_factor},
          {"brightness", s.brightness},
          {"exposure_jitter", s.exposure_jitter},
          {"defocus_rad", s.defocus_rad},
          {"noise",
           {{"gaussian_sigma", n.gaussian_sigma},
            {"dark_mean", n.dark_mean},
            {"dark_gradient", n.dark_gradient},
            {"stray_fraction", n.stray_fraction},
            {"stray_radius_px", {n.stray_radius_min, n.stray_radius_max}},
            {"stray_peak", {n.stray_peak_min, n.stray_peak_max}},
            {"hot_pixels", n.hot_pixel_count},
            {"hot_pixel_peak", n.hot_pixel_peak}}}};
}

}  // namespace

void RunConfig::validate() const {
  if (!(eta > 0.0 && eta < 1.0)) throw FpmError(ErrorKind::InvalidArgument, "config.eta must lie in (0, 1)");
  if (i_th && !(*i_th >= 0.0 && *i_th < 1.0)) {
    throw FpmError(ErrorKind::InvalidArgument, "config.i_th must lie in [0, 1)");
  }
  epry.validate();
  simulate.validate();
  for (double v : sweep.values) {
    if (!(v >= 0.0 && v < 1.0)) throw FpmError(ErrorKind::InvalidArgument, "config.sweep.values must lie in [0, 1)");
  }
}

prep::PreprocessParams RunConfig::preprocess_params() const {
  prep::PreprocessParams p;
  p.eta = eta;
  p.i_th = i_th;
  p.regions = regions;
  p.uniformity = uniformity;
  p.stray_masks = stray_masks;
  p.hot_pixels = hot_pixels;
  return p;
}

RunConfig run_config_from_json(const std::string& text) {
  const json j = parse_json_document(text, "config");
  JsonReader r(j, "config");
  r.allow({"seed", "output", "eta", "i_th", "regions", "uniformity", "stray_masks", "hot_pixels", "epry",
           "simulate", "sweep"});
  RunConfig c;
  c.seed = r.get_or<std::uint64_t>("seed", c.seed);
  c.output = r.get_or<std::string>("output", "");
  c.eta = r.get_or("eta", c.eta);
  if (r.has("i_th") && !r.at("i_th").is_string()) {
    c.i_th = r.get<double>("i_th");
  } else if (r.has("i_th") && r.get<std::string>("i_th") != "auto") {
    throw FpmError(ErrorKind::MalformedInput, "config.i_th: expected a number or \"auto\"");
  }
  if (r.has("regions") && !r.at("regions").is_string()) {
    const auto rects = r.get<std::vector<std::vector<int>>>("regions");
    RegionSpec spec;
    for (const auto& v : rects) {
      if (v.size() != 4) throw FpmError(ErrorKind::MalformedInput, "config.regions: expected [x0, y0, w, h] entries");
      spec.rects.push_back({v[0], v[1], v[2], v[3]});
    }
    c.regions = spec;
  } else if (r.has("regions") && r.get<std::string>("regions") != "auto") {
    throw FpmError(ErrorKind::MalformedInput, "config.regions: expected a list or \"auto\"");
  }
  if (r.has("uniformity")) {
    try {
      c.uniformity = prep::parse_uniformity(r.get<std::string>("uniformity"));
    } catch (const FpmError& e) {
      throw FpmError(ErrorKind::MalformedInput, "config.uniformity: " + std::string(e.what()));
    }
  }
  c.stray_masks = r.get_or("stray_masks", c.stray_masks);
  c.hot_pixels = r.get_or("hot_pixels", c.hot_pixels);
  if (r.has("epry")) {
    JsonReader e = r.object("epry");
    e.allow({"iterations", "sub_factor", "upsample", "object_step", "pupil_step", "pupil_recovery"});
    c.epry.iterations = e.get_or("iterations", c.epry.iterations);
    if (e.has("sub_factor") && !e.at("sub_factor").is_string()) {
      c.epry.sub_factor = e.get<int>("sub_factor");
      c.auto_sub_factor = false;
    } else if (e.has("sub_factor") && e.get<std::string>("sub_factor") != "auto") {
      throw FpmError(ErrorKind::MalformedInput, "config.epry.sub_factor: expected an integer or \"auto\"");
    }
    c.epry.upsample = e.get_or("upsample", c.epry.upsample);
    c.epry.object_step = e.get_or("object_step", c.epry.object_step);
    c.epry.pupil_step = e.get_or("pupil_step", c.epry.pupil_step);
    c.epry.enable_pupil_recovery = e.get_or("pupil_recovery", c.epry.enable_pupil_recovery);
  }
  c.epry.eta = c.eta;
  if (r.has("simulate")) c.simulate = read_simulate(r.object("simulate"));
  c.simulate.seed = c.seed;
  if (r.has("sweep")) {
    JsonReader s = r.object("sweep");
    s.allow({"values", "line"});
    c.sweep.values = s.get_or("values", c.sweep.values);
    if (s.has("line") && !s.at("line").is_string()) {
      const auto v = s.get<std::vector<int>>("line");
      if (v.size() != 4) throw FpmError(ErrorKind::MalformedInput, "config.sweep.line: expected [x0, y0, x1, y1]");
      c.sweep.line = std::array<int, 4>{v[0], v[1], v[2], v[3]};
    }
  }
  try {
    c.validate();
  } catch (const FpmError& e) {
    throw FpmError(ErrorKind::MalformedInput, e.what());
  }
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["eta"] = c.eta;
  j["i_th"] = c.i_th ? json(*c.i_th) : json("auto");
  if (c.regions) {
    json rects = json::array();
    for (const auto& r : c.regions->rects) rects.push_back({r.x0, r.y0, r.w, r.h});
    j["regions"] = rects;
  } else {
    j["regions"] = "auto";
  }
  j["uniformity"] = prep::to_string(c.uniformity);
  j["stray_masks"] = c.stray_masks;
  j["hot_pixels"] = c.hot_pixels;
  j["epry"] = {{"iterations", c.epry.iterations},
               {"sub_factor", c.auto_sub_factor ? json("auto") : json(c.epry.sub_factor)},
               {"upsample", c.epry.upsample},
               {"object_step", c.epry.object_step},
               {"pupil_step", c.epry.pupil_step},
               {"pupil_recovery", c.epry.enable_pupil_recovery}};
  j["simulate"] = write_simulate(c.simulate);
  j["sweep"]["values"] = c.sweep.values;
  if (c.sweep.line) j["sweep"]["line"] = *c.sweep.line;
  return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FpmError(ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str());
}

}  // namespace fpmforge::app
