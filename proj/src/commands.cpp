#include "fpmforge/commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fpmforge/cf2d.hpp"
#include "fpmforge/fft.hpp"
#include "fpmforge/image_io.hpp"
#include "fpmforge/json_util.hpp"
#include "fpmforge/metrics.hpp"

namespace fpmforge::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FpmError(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw FpmError(ErrorKind::Io, "cannot create directory " + dir.string());
}

Image2D to_counts16(const Grid<double>& unit) {
  Image2D out(unit.width(), unit.height(), Domain::RawCounts, 16);
  const double full = out.full_scale();
  for (std::size_t i = 0; i < unit.size(); ++i) {
    out[i] = std::round(std::clamp(unit[i], 0.0, 1.0) * full);
  }
  return out;
}

json preprocess_report_json(const prep::PreprocessReport& r, const prep::PreprocessParams& params,
                            const CaptureStack& stack) {
  json images = json::array();
  for (std::size_t i = 0; i < r.images.size(); ++i) {
    const auto& im = r.images[i];
    json e = {{"row", stack.captures[i].led_row},
              {"col", stack.captures[i].led_col},
              {"alpha", im.alpha},
              {"affected", im.affected},
              {"invalid_fraction", im.invalid_fraction},
              {"hot_pixels", im.hot_pixels}};
    if (!im.error.empty()) e["error"] = im.error;
    images.push_back(std::move(e));
  }
  json regions = json::array();
  for (const auto& rc : r.regions.rects) regions.push_back({rc.x0, rc.y0, rc.w, rc.h});
  int affected = 0;
  for (const auto& im : r.images) affected += im.affected ? 1 : 0;
  return {{"eta", r.eta},
          {"i_th", r.i_th},
          {"threshold_bound", r.threshold_bound},
          {"threshold_bound_after", r.threshold_bound_after},
          {"invalid_fraction", r.invalid_fraction},
          {"uniformity", r.uniformity},
          {"stray_masks", params.stray_masks},
          {"hot_pixels", params.hot_pixels},
          {"regions", regions},
          {"affected_images", affected},
          {"images", images},
          {"warnings", r.warnings},
          {"notes", r.notes}};
}

prep::PreprocessParams params_for(const RunConfig& config, PrepMode mode) {
  auto p = config.preprocess_params();
  if (mode == PrepMode::SkipUniformity) p.uniformity = prep::Uniformity::None;
  return p;
}

void write_processed_dataset(const fs::path& dir, const Dataset& ds, const prep::PreprocessResult& res,
                             const json& report) {
  ensure_dir(dir);
  DatasetManifest m = ds.manifest;
  m.optics.bit_depth = 16;
  m.processed = true;
  m.dark_frame.clear();
  m.images.clear();
  for (std::size_t i = 0; i < ds.stack.size(); ++i) {
    const auto& cap = ds.stack.captures[i];
    ManifestImage im{image_name(cap.led_row, cap.led_col), cap.led_row, cap.led_col, cap.exposure,
                     mask_name(cap.led_row, cap.led_col)};
    save_png16(dir / im.file, to_counts16(res.images[i]));
    const Mask& valid = res.masks.validity[i];
    const Mask& stray = res.masks.stray[i];
    Grid<double> code(valid.width(), valid.height());
    for (std::size_t p = 0; p < code.size(); ++p) {
      const unsigned c = (valid[p] ? 0u : kMaskInvalid) | (stray[p] ? kMaskStray : 0u);
      code[p] = c / 255.0;
    }
    save_png8(dir / im.mask, code);
    m.images.push_back(std::move(im));
  }
  if (ds.truth) {
    m.ground_truth = "truth.cf2d";
    save_cf2d(dir / m.ground_truth, *ds.truth);
  }
  write_file_atomic(dir / "preprocess_report.json", report.dump(2) + "\n");
  write_file_atomic(dir / "manifest.json", manifest_to_json(m));
}

Grid<double> unit_scaled(const ComplexField& f, bool log_scale) {
  Grid<double> out(f.width(), f.height());
  double peak = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    out[i] = log_scale ? std::log1p(std::abs(f[i])) : std::abs(f[i]);
    peak = std::max(peak, out[i]);
  }
  if (peak > 0.0) {
    for (auto& v : out.values()) v /= peak;
  }
  return out;
}

Grid<double> phase_unit(const ComplexField& f) {
  Grid<double> out(f.width(), f.height());
  for (std::size_t i = 0; i < f.size(); ++i) {
    out[i] = (std::arg(f[i]) + std::numbers::pi) / (2.0 * std::numbers::pi);
  }
  return out;
}

json summary_json(const Dataset& ds, const PreparedInput& prepared, const RunResult& run) {
  json s;
  s["dataset"] = ds.dir.lexically_normal().string();
  s["iterations"] = run.params.iterations;
  s["iterations_run"] = run.recon.iterations_run;
  s["sub_factor"] = run.params.sub_factor;
  s["upsample"] = run.params.upsample;
  s["eta"] = run.params.eta;
  s["object_step"] = run.params.object_step;
  s["pupil_step"] = run.params.pupil_step;
  s["pupil_recovery"] = run.params.enable_pupil_recovery;
  s["final_fidelity"] = run.final_fidelity;
  if (run.rmse) s["rmse"] = *run.rmse;
  s["wall_time_s"] = run.wall_time_s;
  s["warnings"] = prepared.warnings;

  json pre = nullptr;
  if (prepared.preprocess) {
    const auto& r = prepared.preprocess->report;
    int affected = 0;
    for (const auto& im : r.images) affected += im.affected ? 1 : 0;
    pre = {{"uniformity", r.uniformity},
           {"i_th", r.i_th},
           {"threshold_bound", r.threshold_bound},
           {"stray_masks", !prepared.input.stray.empty()},
           {"affected_images", affected}};
  } else if (ds.manifest.processed) {
    const fs::path report = ds.dir / "preprocess_report.json";
    if (fs::exists(report)) {
      const json r = parse_json_document(read_text(report), report.string());
      pre = {{"uniformity", r.value("uniformity", "")},
             {"i_th", r.value("i_th", 0.0)},
             {"threshold_bound", r.value("threshold_bound", 0.0)},
             {"stray_masks", !prepared.input.stray.empty()},
             {"affected_images", r.value("affected_images", 0)}};
    } else {
      pre = json::object();
    }
  }
  s["preprocessed"] = !pre.is_null();
  s["preprocess"] = pre;
  return s;
}

int write_run_artifacts(const fs::path& out, const Dataset& ds, const PreparedInput& prepared, const RunResult& run,
                        std::ostream& log) {
  ensure_dir(out);
  const ComplexField object = phase_aligned_object(run.recon, ds.truth);
  save_cf2d(out / "object.cf2d", run.recon.object());
  save_cf2d(out / "pupil.cf2d", run.recon.pupil);
  save_png8(out / "amplitude.png", unit_scaled(object, false));
  save_png8(out / "phase.png", phase_unit(object));
  save_png8(out / "spectrum.png", unit_scaled(run.recon.object_spectrum, true));
  std::string csv = "iteration,fidelity\n";
  for (std::size_t i = 0; i < run.recon.error_log.size(); ++i) {
    csv += std::to_string(i + 1) + "," + fmt_double(run.recon.error_log[i]) + "\n";
  }
  write_file_atomic(out / "error_log.csv", csv);
  write_file_atomic(out / "run_summary.json", summary_json(ds, prepared, run).dump(2) + "\n");
  log << "reconstructed " << ds.stack.size() << " images: fidelity " << run.final_fidelity;
  if (run.rmse) log << ", rmse " << *run.rmse;
  log << "\n";
  for (const auto& w : prepared.warnings) log << "warning: " << w << "\n";
  return prepared.warnings.empty() ? kExitOk : kExitWarnings;
}

std::array<int, 4> midline(int width, int height) { return {0, height / 2, width - 1, height / 2}; }

fs::path resolve_out(const CommandOptions& o, const RunConfig& c, const fs::path& fallback) {
  if (o.out) return *o.out;
  if (!c.output.empty()) return c.output;
  return fallback;
}

fs::path require_dataset(const CommandOptions& o) {
  if (o.datasets.size() != 1) throw FpmError(ErrorKind::InvalidArgument, "exactly one --dataset is required");
  return o.datasets.front();
}

PrepMode mode_for(const CommandOptions& o) {
  if (o.no_preprocess) return PrepMode::NoPreprocess;
  if (o.skip_uniformity) return PrepMode::SkipUniformity;
  return PrepMode::Default;
}

}  // namespace

int worker_count() {
  if (const char* env = std::getenv("FPMFORGE_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw FpmError(ErrorKind::InvalidArgument, "FPMFORGE_THREADS must be a positive integer");
    return static_cast<int>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int auto_sub_factor(const Dataset& dataset) {
  double max_na = 0.0;
  for (const auto& c : dataset.stack.captures) max_na = std::max(max_na, c.k.na());
  const auto& optics = dataset.manifest.optics;
  return prep::check_sampling(optics, optics.na_obj + max_na).recommended_subfactor;
}

PreparedInput prepare_input(const Dataset& ds, const RunConfig& config, PrepMode mode) {
  PreparedInput p;
  for (const auto& c : ds.stack.captures) {
    p.input.ks.push_back(c.k);
    p.input.exposures.push_back(c.exposure);
  }
  if (ds.manifest.processed || mode == PrepMode::NoPreprocess) {
    for (const auto& c : ds.stack.captures) p.input.images.push_back(normalize_image(c.image, c.image.bit_depth()));
    if (ds.manifest.processed) {
      p.input.validity = ds.validity;
      if (config.stray_masks) p.input.stray = ds.stray;
    }
    return p;
  }
  const auto params = params_for(config, mode);
  auto res = prep::preprocess_stack(ds.stack, ds.manifest.optics, params);
  for (const auto& im : res.images) p.input.images.push_back(im);
  p.input.validity = res.masks.validity;
  if (params.stray_masks) p.input.stray = res.masks.stray;
  p.warnings = res.report.warnings;
  p.preprocess = std::move(res);
  return p;
}

RunResult run_reconstruction(const Dataset& ds, const RunConfig& config, const recon::EpryInput& input) {
  RunResult out;
  out.params = config.epry;
  out.params.eta = config.eta;
  if (config.auto_sub_factor) out.params.sub_factor = auto_sub_factor(ds);
  const auto t0 = std::chrono::steady_clock::now();
  out.recon = recon::epry_reconstruct(input, ds.manifest.optics, out.params);
  out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.final_fidelity = recon::convergence_metric(out.recon);
  if (ds.truth) {
    const ComplexField object = out.recon.object();
    if (object.same_shape(*ds.truth)) out.rmse = aligned_amplitude_rmse(object, *ds.truth);
  }
  return out;
}

ComplexField phase_aligned_object(const recon::Reconstruction& r, const std::optional<ComplexField>& truth) {
  ComplexField obj = r.object();
  double offset = 0.0;
  if (truth && truth->same_shape(obj)) {
    offset = mean_phase_offset(obj, *truth);
  } else {
    std::complex<double> acc{};
    for (const auto& v : obj.values()) acc += v;
    offset = std::arg(acc);
  }
  const std::complex<double> rot = std::polar(1.0, -offset);
  for (auto& v : obj.values()) v *= rot;
  return obj;
}

std::vector<double> phase_profile(const ComplexField& object, const std::array<int, 4>& line) {
  const auto [x0, y0, x1, y1] = line;
  auto inside = [&](int x, int y) { return x >= 0 && y >= 0 && x < object.width() && y < object.height(); };
  if (!inside(x0, y0) || !inside(x1, y1)) {
    throw FpmError(ErrorKind::OutOfRange, "phase-profile line leaves the reconstructed patch");
  }
  const int n = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
  std::vector<double> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double t = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    out.push_back(std::arg(object(x, y)));
  }
  return out;
}

int cmd_simulate(const RunConfig& config, const fs::path& out, std::ostream& log) {
  sim::SimulationConfig sc = config.simulate;
  sc.seed = config.seed;
  const auto data = sim::simulate_dataset(sc);
  ensure_dir(out);
  DatasetManifest m;
  m.optics = sc.optics;
  m.led = sc.led;
  m.active = sim::centered_range(sc.led, sc.active_side);
  for (const auto& cap : data.stack.captures) {
    const std::string name = image_name(cap.led_row, cap.led_col);
    save_png16(out / name, cap.image);
    m.images.push_back({name, cap.led_row, cap.led_col, cap.exposure, ""});
  }
  const auto& first = data.stack.captures.front().image;
  const Image2D dark = data.stack.dark ? *data.stack.dark
                                       : Image2D(first.width(), first.height(), Domain::RawCounts, first.bit_depth());
  save_png16(out / "dark.png", dark);
  m.dark_frame = "dark.png";
  save_cf2d(out / "truth.cf2d", data.truth);
  m.ground_truth = "truth.cf2d";

  json blobs = json::array();
  for (const auto& b : data.noise.stray_blobs) {
    const auto& cap = data.stack.captures[b.image_index];
    blobs.push_back({{"file", image_name(cap.led_row, cap.led_col)},
                     {"cx", b.cx},
                     {"cy", b.cy},
                     {"radius_px", b.radius_px},
                     {"peak", b.peak}});
  }
  const json noise = {{"seed", config.seed}, {"stray_blobs", blobs}};
  write_file_atomic(out / "noise_truth.json", noise.dump(2) + "\n");
  write_file_atomic(out / "manifest.json", manifest_to_json(m));
  log << "simulated " << m.images.size() << " images into " << out.string() << "\n";
  return kExitOk;
}

int cmd_preprocess(const RunConfig& config, const fs::path& dataset, const fs::path& out, bool skip_uniformity,
                   std::ostream& log) {
  const Dataset ds = load_dataset(dataset);
  if (ds.manifest.processed) throw FpmError(ErrorKind::InvalidArgument, "dataset is already preprocessed");
  const auto params = params_for(config, skip_uniformity ? PrepMode::SkipUniformity : PrepMode::Default);
  const auto res = prep::preprocess_stack(ds.stack, ds.manifest.optics, params);
  const json report = preprocess_report_json(res.report, params, ds.stack);
  ensure_dir(out);
  write_processed_dataset(out / "processed", ds, res, report);
  write_file_atomic(out / "preprocess_report.json", report.dump(2) + "\n");
  log << "preprocessed " << ds.stack.size() << " images, i_th " << res.report.i_th << ", bound "
      << res.report.threshold_bound << "\n";
  for (const auto& w : res.report.warnings) log << "warning: " << w << "\n";
  return res.report.warnings.empty() ? kExitOk : kExitWarnings;
}

int cmd_reconstruct(const RunConfig& config, const fs::path& dataset, const fs::path& out, PrepMode mode,
                    std::ostream& log) {
  const Dataset ds = load_dataset(dataset);
  const PreparedInput prepared = prepare_input(ds, config, mode);
  const RunResult run = run_reconstruction(ds, config, prepared.input);
  return write_run_artifacts(out, ds, prepared, run, log);
}

int cmd_pipeline(const RunConfig& config, const fs::path& dataset, const fs::path& out, PrepMode mode,
                 std::ostream& log) {
  const Dataset ds = load_dataset(dataset);
  const PreparedInput prepared = prepare_input(ds, config, mode);
  if (prepared.preprocess) {
    const json report = preprocess_report_json(prepared.preprocess->report, params_for(config, mode), ds.stack);
    ensure_dir(out);
    write_processed_dataset(out / "processed", ds, *prepared.preprocess, report);
    write_file_atomic(out / "preprocess_report.json", report.dump(2) + "\n");
  }
  const RunResult run = run_reconstruction(ds, config, prepared.input);
  return write_run_artifacts(out, ds, prepared, run, log);
}

int cmd_sweep_threshold(const RunConfig& config, const fs::path& dataset, const fs::path& out, PrepMode mode,
                        std::ostream& log) {
  const auto& values = config.sweep.values;
  if (values.empty()) throw FpmError(ErrorKind::InvalidArgument, "sweep value list is empty");
  const Dataset ds = load_dataset(dataset);
  const auto& first = ds.stack.captures.front().image;
  const std::array<int, 4> line =
      config.sweep.line.value_or(midline(first.width() * config.epry.upsample, first.height() * config.epry.upsample));
  ensure_dir(out);

  struct Row {
    std::optional<double> rmse;
    double fidelity = 0.0;
    std::vector<double> profile;
    std::vector<std::string> warnings;
  };
  std::vector<Row> rows(values.size());
  std::vector<std::exception_ptr> errors(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      try {
        RunConfig c = config;
        c.i_th = values[i];
        PreparedInput prepared = prepare_input(ds, c, mode);
        if (!prepared.preprocess) {
          for (auto& im : prepared.input.images) {
            const Image2D tmp(im.width(), im.height(), im.storage(), Domain::Normalized);
            im = prep::apply_threshold(tmp, values[i]);
          }
        }
        const RunResult run = run_reconstruction(ds, c, prepared.input);
        const ComplexField object = phase_aligned_object(run.recon, ds.truth);
        rows[i].rmse = run.rmse;
        rows[i].fidelity = run.final_fidelity;
        rows[i].profile = phase_profile(object, line);
        rows[i].warnings = prepared.warnings;
        char name[64];
        std::snprintf(name, sizeof name, "phase_ith_%.4f.png", values[i]);
        save_png8(out / name, phase_unit(object));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(worker_count(), static_cast<int>(values.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const std::size_t n = rows.front().profile.size();
  std::string csv = "i_th,rmse,fidelity,phase_contrast";
  for (std::size_t k = 0; k < n; ++k) csv += ",p_" + std::to_string(k);
  csv += "\n";
  bool warned = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& r = rows[i];
    const auto [lo, hi] = std::minmax_element(r.profile.begin(), r.profile.end());
    csv += fmt_double(values[i]) + "," + (r.rmse ? fmt_double(*r.rmse) : "") + "," + fmt_double(r.fidelity) + "," +
           fmt_double(*hi - *lo);
    for (double p : r.profile) csv += "," + fmt_double(p);
    csv += "\n";
    log << "i_th " << values[i] << ": fidelity " << r.fidelity;
    if (r.rmse) log << ", rmse " << *r.rmse;
    log << "\n";
    for (const auto& w : r.warnings) log << "warning (i_th " << values[i] << "): " << w << "\n";
    warned = warned || !r.warnings.empty();
  }
  write_file_atomic(out / "sweep.csv", csv);
  return warned ? kExitWarnings : kExitOk;
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{"run",        "preprocessed",   "uniformity", "stray_masks",
                                             "i_th",       "sub_factor",     "iterations", "final_fidelity",
                                             "rmse"};
  return cols;
}

int cmd_report(const std::vector<fs::path>& runs, const fs::path& out, std::ostream& log) {
  if (runs.empty()) throw FpmError(ErrorKind::InvalidArgument, "report needs at least one run directory");
  json table = json::array();
  std::string csv;
  for (std::size_t c = 0; c < report_columns().size(); ++c) csv += (c ? "," : "") + report_columns()[c];
  csv += "\n";
  bool warned = false;
  for (const auto& run : runs) {
    json s;
    try {
      s = parse_json_document(read_text(run / "run_summary.json"), (run / "run_summary.json").string());
      if (!s.is_object() || !s.contains("final_fidelity")) {
        throw FpmError(ErrorKind::MalformedInput, "run_summary.json lacks final_fidelity");
      }
    } catch (const FpmError& e) {
      log << "warning: skipping " << run.string() << ": " << e.what() << "\n";
      warned = true;
      continue;
    }
    const json pre = s.value("preprocess", json(nullptr));
    auto pre_field = [&](const char* key) { return pre.is_object() && pre.contains(key) ? pre[key] : json(nullptr); };
    json row = {{"run", run.lexically_normal().string()},
                {"preprocessed", s.value("preprocessed", false)},
                {"uniformity", pre_field("uniformity")},
                {"stray_masks", pre_field("stray_masks")},
                {"i_th", pre_field("i_th")},
                {"sub_factor", s.value("sub_factor", json(nullptr))},
                {"iterations", s.value("iterations", json(nullptr))},
                {"final_fidelity", s["final_fidelity"]},
                {"rmse", s.value("rmse", json(nullptr))}};
    for (std::size_t c = 0; c < report_columns().size(); ++c) {
      const json& v = row[report_columns()[c]];
      std::string cell;
      if (v.is_string()) {
        cell = v.get<std::string>();
      } else if (v.is_boolean()) {
        cell = v.get<bool>() ? "true" : "false";
      } else if (v.is_number_float()) {
        cell = fmt_double(v.get<double>());
      } else if (!v.is_null()) {
        cell = v.dump();
      }
      csv += (c ? "," : "") + cell;
    }
    csv += "\n";
    table.push_back(std::move(row));
  }
  if (table.empty()) throw FpmError(ErrorKind::MalformedInput, "no valid run summaries");
  ensure_dir(out);
  write_file_atomic(out / "report.csv", csv);
  write_file_atomic(out / "report.json", table.dump(2) + "\n");
  log << "report of " << table.size() << " runs written to " << out.string() << "\n";
  return warned ? kExitWarnings : kExitOk;
}

int run_command(const std::string& command, const CommandOptions& o, std::ostream& log) {
  try {
    if (command == "report") {
      std::vector<fs::path> runs = o.datasets;
      return cmd_report(runs, o.out.value_or(fs::path(".")), log);
    }
    if (o.config.empty()) throw FpmError(ErrorKind::InvalidArgument, "--config is required");
    RunConfig config = load_run_config(o.config);
    if (o.seed) {
      config.seed = *o.seed;
      config.simulate.seed = *o.seed;
    }
    if (command == "simulate") return cmd_simulate(config, resolve_out(o, config, "dataset"), log);
    if (command == "preprocess") {
      const fs::path ds = require_dataset(o);
      return cmd_preprocess(config, ds, resolve_out(o, config, ds), o.skip_uniformity, log);
    }
    if (command == "reconstruct") {
      return cmd_reconstruct(config, require_dataset(o), resolve_out(o, config, "run"), mode_for(o), log);
    }
    if (command == "pipeline") {
      return cmd_pipeline(config, require_dataset(o), resolve_out(o, config, "run"), mode_for(o), log);
    }
    if (command == "sweep-threshold") {
      return cmd_sweep_threshold(config, require_dataset(o), resolve_out(o, config, "sweep"), mode_for(o), log);
    }
    throw FpmError(ErrorKind::InvalidArgument, "unknown command '" + command + "'");
  } catch (const FpmError& e) {
    log << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
  }
  return kExitError;
}

}  // namespace fpmforge::app
