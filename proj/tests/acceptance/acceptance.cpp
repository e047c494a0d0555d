// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../common/helpers.hpp"
#include "../common/oracles.hpp"
#include "fpmforge/commands.hpp"
#include "fpmforge/metrics.hpp"
#include "fpmforge/preprocess.hpp"
#include "fpmforge/reconstruct.hpp"
#include "fpmforge/simulator.hpp"

using namespace fpmforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json noisy_config() {
  return json{{"seed", 1},
              {"i_th", 0.02},
              {"simulate",
               {{"exposure_jitter", 0.1},
                {"noise",
                 {{"gaussian_sigma", 0.01}, {"dark_mean", 0.02}, {"dark_gradient", 0.01}, {"stray_fraction", 0.1}}}}}};
}

sim::SimulationConfig noisy_sim_config() {
  sim::SimulationConfig c;
  c.exposure_jitter = 0.1;
  c.noise.gaussian_sigma = 0.01;
  c.noise.dark_mean = 0.02;
  c.noise.dark_gradient = 0.01;
  c.noise.stray_fraction = 0.1;
  c.seed = 1;
  return c;
}

/// Working directory shared by the CLI-driven criteria.
struct Bench {
  testutil::TempDir dir{"acceptance"};
  fs::path config;
  fs::path direct_config;
  fs::path sweep_config;
  fs::path dataset;
  bool simulated = false;

  Bench() {
    config = dir.path / "noisy.json";
    std::ofstream(config) << noisy_config().dump(2);
    json direct = noisy_config();
    direct["uniformity"] = "direct";
    direct_config = dir.path / "direct.json";
    std::ofstream(direct_config) << direct.dump(2);
    dataset = dir.path / "data";
  }

  int run(const std::string& cmd, const fs::path& cfg, const fs::path& data, const fs::path& out,
          bool no_preprocess = false) {
    app::CommandOptions o;
    o.config = cfg;
    if (!data.empty()) o.datasets = {data};
    o.out = out;
    o.no_preprocess = no_preprocess;
    std::ostringstream log;
    const int code = app::run_command(cmd, o, log);
    if (code == app::kExitError) std::fprintf(stderr, "%s %s: %s", cmd.c_str(), out.string().c_str(), log.str().c_str());
    return code;
  }

  void ensure_dataset() {
    if (simulated) return;
    if (run("simulate", config, {}, dataset) != app::kExitOk) throw std::runtime_error("simulate failed");
    simulated = true;
  }

  json summary(const fs::path& run_dir) { return json::parse(read_text(run_dir / "run_summary.json")); }
};

Outcome criterion_alpha() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_alpha = 0.0;
  double worst_resid = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int w = 24 + static_cast<int>(u(rng) * 40);
    const int h = 24 + static_cast<int>(u(rng) * 40);
    const double gain = 0.2 + 3.5 * u(rng);
    Image2D d(w, h, Domain::Normalized);
    Image2D m(w, h, Domain::Normalized);
    for (std::size_t p = 0; p < d.size(); ++p) {
      d[p] = 0.01 + 0.2 * u(rng);
      m[p] = std::clamp(gain * d[p] + 0.05 * (u(rng) - 0.5), 0.0, 1.0);
    }
    RegionSpec regions;
    for (int r = 0; r < 2; ++r) {
      const int rw = 4 + static_cast<int>(u(rng) * (w / 2 - 4));
      const int rh = 4 + static_cast<int>(u(rng) * (h / 2 - 4));
      const int x0 = static_cast<int>(u(rng) * (w - rw));
      const int y0 = static_cast<int>(u(rng) * (h - rh));
      regions.rects.push_back({x0, y0, rw, rh});
    }
    const double alpha = prep::uniformity_alpha(m, d, regions);
    worst_alpha = std::max(worst_alpha, std::abs(alpha - oracle::alpha_scan(m, d, regions)));
    worst_resid = std::max(worst_resid, std::abs(oracle::normal_residual(m, d, regions, alpha)));
  }
  return {worst_alpha <= 1e-4 && worst_resid < 1e-9,
          fmt("max |alpha - scan| = %.3g, max normal residual = %.3g", worst_alpha, worst_resid)};
}

Outcome criterion_otsu() {
  std::vector<Image2D> images;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 rng(1000 + s);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int w = 16 + static_cast<int>(u(rng) * 48);
    const int h = 16 + static_cast<int>(u(rng) * 48);
    Image2D img(w, h, Domain::Normalized);
    const double lo = u(rng) * 0.5;
    const double span = u(rng) * (1.0 - lo);
    for (auto& v : img.values()) v = lo + span * u(rng);
    images.push_back(std::move(img));
  }
  auto structured = [&](auto fill) {
    Image2D img(40, 30, Domain::Normalized);
    for (int y = 0; y < 30; ++y) {
      for (int x = 0; x < 40; ++x) img(x, y) = fill(x, y);
    }
    images.push_back(std::move(img));
  };
  structured([](int x, int) { return (x % 4) / 256.0; });
  structured([](int x, int y) { return x == 0 && y == 0 ? 0.9 : 0.37; });
  structured([](int x, int y) { return x + 40 * y < 12 ? 1.0 : 0.0; });
  structured([](int x, int) { return x < 20 ? 0.1 : 0.8; });
  structured([](int x, int y) { return (x + y) % 2 ? 0.25 : 0.75; });
  structured([](int x, int) { return x / 39.0; });
  structured([](int x, int y) { return x == 7 && y == 3 ? 1.0 : 0.0; });
  structured([](int x, int) { return x < 13 ? 0.05 : (x < 26 ? 0.5 : 0.95); });
  structured([](int x, int y) { return std::hypot(x - 20, y - 15) < 6 ? 0.6 : 0.02; });
  structured([](int x, int y) { return 0.5 + 0.5 * std::sin(0.3 * x) * std::cos(0.2 * y); });
  int mismatches = 0;
  for (const auto& img : images) {
    if (prep::otsu_threshold(img, 256) != oracle::otsu_exhaustive(img, 256)) ++mismatches;
  }
  return {mismatches == 0, fmt("%d of %zu images differ from the exhaustive search", mismatches, images.size())};
}

Outcome criterion_update_contract() {
  double worst_mod = 0.0;
  double worst_first = 0.0;
  long kept_mismatch = 0;
  long first = 0;
  long kept = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 rng(500 + s);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int w = 48;
    const int h = 40;
    ComplexField phi = testutil::random_field(w, h, s);
    for (auto& v : phi.values()) v *= 0.3;
    Grid<double> ic(w, h);
    Mask stray(w, h);
    for (std::size_t p = 0; p < ic.size(); ++p) {
      ic[p] = 0.3 * u(rng);
      stray[p] = u(rng) < 0.4 ? 1 : 0;
    }
    const double eta = 0.1;
    const ComplexField out = recon::amplitude_update(phi, ic, stray, Mask{}, eta);
    for (std::size_t p = 0; p < out.size(); ++p) {
      const double sim = std::norm(phi[p]);
      const bool both_low = sim <= eta && ic[p] <= eta;
      const double i_upd = (!both_low && stray[p]) ? sim : ic[p];
      worst_mod = std::max(worst_mod, std::abs(std::abs(out[p]) - std::sqrt(i_upd)));
      if (both_low) {
        ++first;
        worst_first = std::max(worst_first, std::abs(std::norm(out[p]) - ic[p]));
      } else if (stray[p]) {
        ++kept;
        if (out[p] != phi[p]) ++kept_mismatch;
      }
    }
  }
  return {worst_mod <= 1e-12 && worst_first <= 1e-12 && kept_mismatch == 0 && first > 0 && kept > 0,
          fmt("max ||phi| - sqrt(I)| = %.3g, max first-branch error = %.3g, %ld of %ld masked pixels changed",
              worst_mod, worst_first, kept_mismatch, kept)};
}

Outcome criterion_noiseless() {
  const sim::SimulationConfig cfg;
  const auto d = sim::simulate_dataset(cfg);
  recon::EpryInput in;
  double max_na = 0.0;
  for (const auto& c : d.stack.captures) {
    in.images.push_back(normalize_image(c.image, c.image.bit_depth()));
    in.ks.push_back(c.k);
    in.exposures.push_back(c.exposure);
    in.validity.push_back(prep::mark_saturation(c.image, c.image.bit_depth()));
    max_na = std::max(max_na, c.k.na());
  }
  recon::EpryParams p;
  p.iterations = 30;
  p.sub_factor = prep::check_sampling(cfg.optics, cfg.optics.na_obj + max_na).recommended_subfactor;
  const auto r = recon::epry_reconstruct(in, cfg.optics, p);
  const double rmse = aligned_amplitude_rmse(r.object(), d.truth);
  const double fid = recon::convergence_metric(r);
  return {rmse < 0.05 && fid < 1e-3, fmt("rmse %.4f (< 0.05), fidelity %.3g (< 1e-3), sub_factor %d", rmse, fid,
                                         p.sub_factor)};
}

Outcome criterion_benefit(Bench& b) {
  b.ensure_dataset();
  const fs::path root = b.dir.path;
  if (b.run("reconstruct", b.config, b.dataset, root / "full") == app::kExitError ||
      b.run("reconstruct", b.config, b.dataset, root / "none", true) == app::kExitError ||
      b.run("reconstruct", b.direct_config, b.dataset, root / "direct") == app::kExitError) {
    return {false, "a reconstruction failed"};
  }
  const double full = b.summary(root / "full")["rmse"].get<double>();
  const double none = b.summary(root / "none")["rmse"].get<double>();
  const double direct = b.summary(root / "direct")["rmse"].get<double>();
  const double gain = 1.0 - full / none;
  return {gain >= 0.2 && direct > full,
          fmt("rmse full %.4f, none %.4f (%.1f%% lower), direct %.4f", full, none, 100.0 * gain, direct)};
}

Outcome criterion_sweep(Bench& b) {
  b.ensure_dataset();
  const fs::path root = b.dir.path;
  if (b.run("sweep-threshold", b.config, b.dataset, root / "sweep") == app::kExitError) return {false, "sweep failed"};
  if (b.run("preprocess", b.config, b.dataset, root / "prep") == app::kExitError) return {false, "preprocess failed"};
  const double bound = json::parse(read_text(root / "prep" / "preprocess_report.json"))["threshold_bound"].get<double>();
  std::stringstream csv(read_text(root / "sweep" / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<double> ith;
  std::vector<double> rmse;
  while (std::getline(csv, line)) {
    std::stringstream row(line);
    std::string a;
    std::string r;
    std::getline(row, a, ',');
    std::getline(row, r, ',');
    ith.push_back(std::stod(a));
    rmse.push_back(std::stod(r));
  }
  if (rmse.size() < 3) return {false, "sweep produced fewer than three rows"};
  const auto best = static_cast<std::size_t>(std::min_element(rmse.begin(), rmse.end()) - rmse.begin());
  const bool interior = best != 0 && best + 1 != rmse.size();
  const double top = *std::max_element(ith.begin(), ith.end());
  std::string curve;
  for (std::size_t i = 0; i < rmse.size(); ++i) curve += fmt("%s%.3g:%.4f", i ? " " : "", ith[i], rmse[i]);
  return {interior && bound > top, fmt("minimum at i_th %.3g, bound %.4f; %s", ith[best], bound, curve.c_str())};
}

Outcome criterion_stray() {
  const sim::SimulationConfig cfg = noisy_sim_config();
  const auto d = sim::simulate_dataset(cfg);
  prep::PreprocessParams p;
  p.i_th = 0.02;
  const auto r = prep::preprocess_stack(d.stack, cfg.optics, p);
  std::vector<bool> expected(d.stack.size(), false);
  for (const auto& blob : d.noise.stray_blobs) expected[blob.image_index] = true;
  int wrong = 0;
  int k = 0;
  double worst = 1.0;
  for (std::size_t i = 0; i < d.stack.size(); ++i) {
    if (expected[i]) ++k;
    if (r.masks.affected[i] != expected[i]) ++wrong;
    if (!expected[i]) continue;
    const Mask& m = r.masks.stray[i];
    long agree = 0;
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        bool in_blob = false;
        for (const auto& blob : d.noise.stray_blobs) {
          in_blob = in_blob || (blob.image_index == i && blob.contains(x, y));
        }
        if ((m(x, y) != 0) == in_blob) ++agree;
      }
    }
    worst = std::min(worst, static_cast<double>(agree) / static_cast<double>(m.size()));
  }
  return {k > 0 && wrong == 0 && worst >= 0.99,
          fmt("%d blob images, %d misclassified, worst pixel agreement %.4f", k, wrong, worst)};
}

Outcome criterion_sampling() {
  const OpticsConfig o{0.1, 4.0, 3.75, 8, 631.13};
  const auto r = prep::check_sampling(o, 0.5);
  const bool ok = std::abs(r.effective_pixel_um - 0.9375) <= 1e-6 && std::abs(r.nyquist_raw_um - 3.15565) <= 1e-6 &&
                  std::abs(r.nyquist_synthetic_um - 0.63113) <= 1e-6 && r.ok_raw && !r.ok_synthetic &&
                  r.recommended_subfactor == 2;
  return {ok, fmt("effective %.6f um, raw Nyquist %.6f um (%s), synthetic Nyquist %.6f um (%s), sub_factor %d",
                  r.effective_pixel_um, r.nyquist_raw_um, r.ok_raw ? "ok" : "not ok", r.nyquist_synthetic_um,
                  r.ok_synthetic ? "ok" : "not ok", r.recommended_subfactor)};
}

Outcome criterion_determinism(Bench& b) {
  b.ensure_dataset();
  const fs::path root = b.dir.path;
  const fs::path again = root / "data_again";
  if (b.run("simulate", b.config, {}, again) != app::kExitOk) return {false, "second simulation failed"};
  if (b.run("pipeline", b.config, b.dataset, root / "det_a") == app::kExitError ||
      b.run("pipeline", b.config, again, root / "det_b") == app::kExitError) {
    return {false, "pipeline failed"};
  }
  const json a = b.summary(root / "det_a");
  const json c = b.summary(root / "det_b");
  const std::string fa = a["final_fidelity"].dump() + " " + a["rmse"].dump();
  const std::string fc = c["final_fidelity"].dump() + " " + c["rmse"].dump();
  return {fa == fc, fmt("run 1: %s, run 2: %s", fa.c_str(), fc.c_str())};
}

}  // namespace

int main() {
  Bench bench;
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0 = none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "uniformity weight matches the least-squares scan", 10.0, criterion_alpha},
      {2, "Otsu matches exhaustive search", 5.0, criterion_otsu},
      {3, "masked amplitude update contract", 5.0, criterion_update_contract},
      {4, "noiseless round trip", 120.0, criterion_noiseless},
      {5, "preprocessing benefit", 600.0, [&] { return criterion_benefit(bench); }},
      {6, "threshold sweep has an interior minimum", 0.0, [&] { return criterion_sweep(bench); }},
      {7, "stray-light detection", 30.0, criterion_stray},
      {8, "sampling report", 0.0, criterion_sampling},
      {9, "determinism", 0.0, [&] { return criterion_determinism(bench); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0.0 && secs > c.limit_s) {
      o.pass = false;
      o.detail += fmt("; exceeded %.0f s", c.limit_s);
    }
    if (!o.pass) ++failed;
    std::printf("%s %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
