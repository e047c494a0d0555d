#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "fpmforge/commands.hpp"
#include "fpmforge/config.hpp"
#include "fpmforge/fft.hpp"
#include "fpmforge/metrics.hpp"
#include "fpmforge/preprocess.hpp"
#include "fpmforge/reconstruct.hpp"
#include "fpmforge/simulator.hpp"

namespace py = pybind11;
using namespace fpmforge;

namespace {

using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

template <typename T, typename A>
std::vector<T> flat(const A& a, int& w, int& h) {
  if (a.ndim() != 2) throw FpmError(ErrorKind::InvalidArgument, "expected a 2-D array");
  h = static_cast<int>(a.shape(0));
  w = static_cast<int>(a.shape(1));
  return std::vector<T>(a.data(), a.data() + a.size());
}

Image2D to_image(const RealArray& a) {
  int w = 0;
  int h = 0;
  auto v = flat<double>(a, w, h);
  return Image2D(w, h, std::move(v), Domain::Normalized);
}

ComplexField to_field(const ComplexArray& a, Space space) {
  int w = 0;
  int h = 0;
  auto v = flat<std::complex<double>>(a, w, h);
  return ComplexField(w, h, std::move(v), space);
}

Mask to_mask(const std::optional<MaskArray>& a) {
  if (!a) return Mask{};
  int w = 0;
  int h = 0;
  auto v = flat<std::uint8_t>(*a, w, h);
  return Mask(w, h, std::move(v));
}

template <typename T>
py::array_t<T> to_array(const Grid<T>& g) {
  py::array_t<T> out({g.height(), g.width()});
  std::copy(g.storage().begin(), g.storage().end(), out.mutable_data());
  return out;
}

RegionSpec to_regions(const std::vector<std::array<int, 4>>& rects) {
  RegionSpec r;
  for (const auto& q : rects) r.rects.push_back({q[0], q[1], q[2], q[3]});
  return r;
}

OpticsConfig make_optics(double wavelength_nm, double na_obj, double magnification, double camera_pixel_um,
                         int bit_depth) {
  OpticsConfig o{na_obj, magnification, camera_pixel_um, bit_depth, wavelength_nm};
  o.validate();
  return o;
}

py::dict simulate(const std::string& config_json) {
  const app::RunConfig cfg = app::run_config_from_json(config_json);
  const sim::SimulatedDataset d = sim::simulate_dataset(cfg.simulate);
  py::list images;
  py::list ks;
  py::list exposures;
  py::list leds;
  for (std::size_t i = 0; i < d.stack.size(); ++i) {
    const auto& c = d.stack.captures[i];
    images.append(to_array<double>(normalize_image(c.image, c.image.bit_depth())));
    ks.append(py::make_tuple(c.k.sin_x, c.k.sin_y));
    exposures.append(c.exposure);
    leds.append(py::make_tuple(c.led_row, c.led_col));
  }
  py::list blobs;
  for (const auto& b : d.noise.stray_blobs) {
    blobs.append(py::dict(py::arg("image") = b.image_index, py::arg("cx") = b.cx, py::arg("cy") = b.cy,
                          py::arg("radius_px") = b.radius_px, py::arg("peak") = b.peak));
  }
  py::dict out;
  out["images"] = images;
  out["ks"] = ks;
  out["exposures"] = exposures;
  out["leds"] = leds;
  out["truth"] = to_array(static_cast<const Grid<std::complex<double>>&>(d.truth));
  out["dark"] = d.stack.dark ? py::object(to_array<double>(normalize_image(*d.stack.dark, d.stack.dark->bit_depth())))
                             : py::object(py::none());
  out["stray_blobs"] = blobs;
  const auto& o = cfg.simulate.optics;
  out["optics"] = py::dict(py::arg("wavelength_nm") = o.wavelength_nm, py::arg("na_obj") = o.na_obj,
                           py::arg("magnification") = o.magnification, py::arg("camera_pixel_um") = o.camera_pixel_um,
                           py::arg("bit_depth") = o.bit_depth);
  return out;
}

py::dict reconstruct(const std::vector<RealArray>& images, const std::vector<std::pair<double, double>>& ks,
                     const py::dict& optics, std::vector<double> exposures, const std::vector<MaskArray>& validity,
                     const std::vector<MaskArray>& stray, int iterations, double eta, int sub_factor, int upsample,
                     bool pupil_recovery) {
  recon::EpryInput in;
  for (const auto& a : images) in.images.push_back(to_image(a));
  for (const auto& [sx, sy] : ks) in.ks.push_back({sx, sy});
  in.exposures = std::move(exposures);
  for (const auto& m : validity) in.validity.push_back(to_mask(m));
  for (const auto& m : stray) in.stray.push_back(to_mask(m));
  const OpticsConfig o = make_optics(optics["wavelength_nm"].cast<double>(), optics["na_obj"].cast<double>(),
                                     optics["magnification"].cast<double>(),
                                     optics["camera_pixel_um"].cast<double>(), optics["bit_depth"].cast<int>());
  recon::EpryParams p;
  p.iterations = iterations;
  p.eta = eta;
  p.sub_factor = sub_factor;
  p.upsample = upsample;
  p.enable_pupil_recovery = pupil_recovery;
  recon::Reconstruction r;
  {
    py::gil_scoped_release release;
    r = recon::epry_reconstruct(in, o, p);
  }
  py::dict out;
  out["object"] = to_array(static_cast<const Grid<std::complex<double>>&>(r.object()));
  out["spectrum"] = to_array(static_cast<const Grid<std::complex<double>>&>(r.object_spectrum));
  out["pupil"] = to_array(static_cast<const Grid<std::complex<double>>&>(r.pupil));
  out["error_log"] = r.error_log;
  out["sub_factor"] = r.sub_factor;
  return out;
}

}  // namespace

PYBIND11_MODULE(_fpmforge, m) {
  m.doc() = "Fourier ptychography simulation, preprocessing and reconstruction";

  py::register_exception<FpmError>(m, "FpmError", PyExc_ValueError);

  m.def("fft2c", [](const ComplexArray& a) {
    return to_array(static_cast<const Grid<std::complex<double>>&>(fft2c(to_field(a, Space::Spatial))));
  });
  m.def("ifft2c", [](const ComplexArray& a) {
    return to_array(static_cast<const Grid<std::complex<double>>&>(ifft2c(to_field(a, Space::Fourier))));
  });

  m.def(
      "check_sampling",
      [](double synthetic_na, double wavelength_nm, double na_obj, double magnification, double camera_pixel_um) {
        const auto r = prep::check_sampling(make_optics(wavelength_nm, na_obj, magnification, camera_pixel_um, 8),
                                            synthetic_na);
        return py::dict(py::arg("effective_pixel_um") = r.effective_pixel_um,
                        py::arg("nyquist_raw_um") = r.nyquist_raw_um,
                        py::arg("nyquist_synthetic_um") = r.nyquist_synthetic_um, py::arg("ok_raw") = r.ok_raw,
                        py::arg("ok_synthetic") = r.ok_synthetic,
                        py::arg("recommended_subfactor") = r.recommended_subfactor);
      },
      py::arg("synthetic_na"), py::arg("wavelength_nm") = 631.13, py::arg("na_obj") = 0.1,
      py::arg("magnification") = 4.0, py::arg("camera_pixel_um") = 3.75);

  m.def(
      "otsu_threshold", [](const RealArray& img, int levels) { return prep::otsu_threshold(to_image(img), levels); },
      py::arg("image"), py::arg("levels") = 256);
  m.def(
      "detect_stray_mask",
      [](const RealArray& img, bool dark_field, double eta) {
        const auto r = prep::detect_stray_mask(to_image(img), dark_field, eta);
        return py::make_tuple(r.affected, to_array<std::uint8_t>(r.mask), r.warnings);
      },
      py::arg("image"), py::arg("dark_field"), py::arg("eta") = prep::kDefaultEta);
  m.def(
      "uniformity_alpha",
      [](const RealArray& measured, const RealArray& dark, const std::vector<std::array<int, 4>>& regions) {
        return prep::uniformity_alpha(to_image(measured), to_image(dark), to_regions(regions));
      },
      py::arg("measured"), py::arg("dark"), py::arg("regions"));
  m.def(
      "weighted_subtract",
      [](const RealArray& measured, const RealArray& dark, double alpha) {
        return to_array<double>(prep::weighted_subtract(to_image(measured), to_image(dark), alpha));
      },
      py::arg("measured"), py::arg("dark"), py::arg("alpha"));
  m.def("threshold_bound", [](const std::vector<RealArray>& stack) {
    std::vector<Image2D> images;
    for (const auto& a : stack) images.push_back(to_image(a));
    return prep::threshold_bound(images);
  });
  m.def(
      "apply_threshold",
      [](const RealArray& img, double i_th) { return to_array<double>(prep::apply_threshold(to_image(img), i_th)); },
      py::arg("image"), py::arg("i_th"));

  m.def(
      "amplitude_update",
      [](const ComplexArray& phi, const RealArray& measured, std::optional<MaskArray> stray,
         std::optional<MaskArray> valid, double eta) {
        const Image2D meas = to_image(measured);
        const ComplexField out =
            recon::amplitude_update(to_field(phi, Space::Spatial), meas, to_mask(stray), to_mask(valid), eta);
        return to_array(static_cast<const Grid<std::complex<double>>&>(out));
      },
      py::arg("phi"), py::arg("measured"), py::arg("stray") = py::none(), py::arg("valid") = py::none(),
      py::arg("eta") = prep::kDefaultEta);

  m.def("simulate", &simulate, py::arg("config_json") = "{}",
        "Simulates a capture stack from a run-config JSON document; images are normalized.");
  m.def("reconstruct", &reconstruct, py::arg("images"), py::arg("ks"), py::arg("optics"),
        py::arg("exposures") = std::vector<double>{}, py::arg("validity") = std::vector<MaskArray>{},
        py::arg("stray") = std::vector<MaskArray>{}, py::arg("iterations") = 30, py::arg("eta") = prep::kDefaultEta,
        py::arg("sub_factor") = 1, py::arg("upsample") = 4, py::arg("pupil_recovery") = true);

  m.def(
      "aligned_amplitude_rmse",
      [](const ComplexArray& a, const ComplexArray& b) {
        return aligned_amplitude_rmse(to_field(a, Space::Spatial), to_field(b, Space::Spatial));
      },
      py::arg("recovered"), py::arg("truth"));

  m.def(
      "run_command",
      [](const std::string& command, std::optional<std::filesystem::path> config,
         std::vector<std::filesystem::path> datasets, std::optional<std::filesystem::path> out,
         std::optional<std::uint64_t> seed, bool skip_uniformity, bool no_preprocess) {
        app::CommandOptions o;
        if (config) o.config = *config;
        o.datasets = std::move(datasets);
        o.out = std::move(out);
        o.seed = seed;
        o.skip_uniformity = skip_uniformity;
        o.no_preprocess = no_preprocess;
        std::ostringstream log;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = app::run_command(command, o, log);
        }
        return py::make_tuple(code, log.str());
      },
      py::arg("command"), py::arg("config") = py::none(), py::arg("datasets") = std::vector<std::filesystem::path>{},
      py::arg("out") = py::none(), py::arg("seed") = py::none(), py::arg("skip_uniformity") = false,
      py::arg("no_preprocess") = false, "Runs a CLI command; returns (exit_code, log).");
}
