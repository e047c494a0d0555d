#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "../common/helpers.hpp"
#include "fpmforge/cf2d.hpp"
#include "fpmforge/commands.hpp"
#include "fpmforge/config.hpp"
#include "fpmforge/dataset.hpp"
#include "fpmforge/image_io.hpp"

using namespace fpmforge;
using namespace fpmforge::app;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string line; std::getline(ss, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

json small_config_json() {
  return json{{"seed", 3},
              {"i_th", 0.0},
              {"epry", {{"iterations", 4}}},
              {"simulate", {{"hr_size", 64}, {"active_side", 5}, {"noise", {{"dark_mean", 0.002}}}}},
              {"sweep", {{"values", {0.0, 0.01}}}}};
}

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "config.json") {
  const fs::path p = dir / name;
  write_text(p, j.dump(2));
  return p;
}

int run(const std::string& cmd, CommandOptions o, std::string* log_out = nullptr) {
  std::ostringstream log;
  const int code = run_command(cmd, o, log);
  if (log_out) *log_out = log.str();
  return code;
}

CommandOptions opts(const fs::path& config, const fs::path& dataset, const fs::path& out) {
  CommandOptions o;
  o.config = config;
  if (!dataset.empty()) o.datasets = {dataset};
  o.out = out;
  return o;
}

DatasetManifest sample_manifest() {
  DatasetManifest m;
  m.optics = OpticsConfig{0.1, 4.0, 3.75, 12, 632.0};
  m.led.offset_x_mm = 0.5;
  m.active = sim::LedRange{15, 17, 15, 17};
  m.images = {{"a.png", 15, 15, 1.0, ""}, {"b.png", 16, 15, 0.75, ""}};
  m.dark_frame = "dark.png";
  return m;
}

}  // namespace

TEST_CASE("manifest round trip") {
  const DatasetManifest m = sample_manifest();
  const DatasetManifest back = manifest_from_json(manifest_to_json(m));
  CHECK(back == m);
  CHECK(manifest_to_json(back) == manifest_to_json(m));
  CHECK(image_name(3, 12) == "img_r03_c12.png");
  CHECK(mask_name(3, 12) == "mask_r03_c12.png");
}

TEST_CASE("manifest diagnostics name the location") {
  try {
    manifest_from_json("{\n  \"format\": \"fpmforge-dataset\",\n  \"version\": ,\n}");
    FAIL("expected a syntax error");
  } catch (const FpmError& e) {
    CHECK(e.kind() == ErrorKind::MalformedInput);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  json j = json::parse(manifest_to_json(sample_manifest()));
  j["extra"] = 1;
  CHECK_THROWS_WITH_AS(manifest_from_json(j.dump()), doctest::Contains("extra"), FpmError);
  j = json::parse(manifest_to_json(sample_manifest()));
  j["images"][0]["row"] = "one";
  CHECK_THROWS_WITH_AS(manifest_from_json(j.dump()), doctest::Contains("row"), FpmError);
}

TEST_CASE("manifest validation") {
  testutil::TempDir dir("cli");
  DatasetManifest m = sample_manifest();
  m.images.push_back({"c.png", 15, 16, 1.0, ""});
  m.images.push_back({"d.png", 16, 16, 1.0, ""});
  CHECK_THROWS_AS(validate_manifest(m, dir.path), FpmError);  // files missing
  for (const auto& im : m.images) write_text(dir.path / im.file, "x");
  write_text(dir.path / "dark.png", "x");
  CHECK_NOTHROW(validate_manifest(m, dir.path));

  DatasetManifest dup = m;
  dup.images[3].row = 15;
  dup.images[3].col = 15;
  CHECK_THROWS_AS(validate_manifest(dup, dir.path), FpmError);
  DatasetManifest outside = m;
  outside.images[3].row = 20;
  CHECK_THROWS_AS(validate_manifest(outside, dir.path), FpmError);
  DatasetManifest missing = m;
  missing.images.pop_back();
  CHECK_THROWS_AS(validate_manifest(missing, dir.path), FpmError);
  DatasetManifest exposure = m;
  exposure.images[0].exposure = 0.0;
  CHECK_THROWS_AS(validate_manifest(exposure, dir.path), FpmError);
}

TEST_CASE("run configuration parsing") {
  const RunConfig defaults = run_config_from_json("{}");
  CHECK(defaults.eta == doctest::Approx(0.1));
  CHECK_FALSE(defaults.i_th.has_value());
  CHECK(defaults.auto_sub_factor);

  const RunConfig c = run_config_from_json(small_config_json().dump());
  CHECK(c.seed == 3);
  CHECK(c.simulate.seed == 3);
  CHECK(c.epry.iterations == 4);
  CHECK(c.simulate.hr_size == 64);
  CHECK(run_config_to_json(run_config_from_json(run_config_to_json(c))) == run_config_to_json(c));

  const RunConfig r = run_config_from_json(R"({"regions": [[0, 0, 4, 4], [8, 8, 2, 2]], "uniformity": "direct"})");
  REQUIRE(r.regions.has_value());
  CHECK(r.regions->rects.size() == 2);
  CHECK(r.regions->rects[1] == Rect{8, 8, 2, 2});
  CHECK(r.uniformity == prep::Uniformity::Direct);

  CHECK_THROWS_WITH_AS(run_config_from_json(R"({"bogus": 1})"), doctest::Contains("config.bogus: unknown key"),
                       FpmError);
  CHECK_THROWS_WITH_AS(run_config_from_json(R"({"epry": {"iters": 3}})"),
                       doctest::Contains("config.epry.iters: unknown key"), FpmError);
  CHECK_THROWS_WITH_AS(run_config_from_json(R"({"eta": "high"})"), doctest::Contains("config.eta: wrong type"),
                       FpmError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{\n\"eta\": 0.1,,\n}"), doctest::Contains("line 2"), FpmError);
  CHECK_THROWS_AS(run_config_from_json(R"({"eta": 1.5})"), FpmError);
  CHECK_THROWS_AS(run_config_from_json(R"({"epry": {"sub_factor": 3}})"), FpmError);
  CHECK_THROWS_AS(run_config_from_json(R"({"uniformity": "median"})"), FpmError);
}

TEST_CASE("worker count honours the environment") {
  ::setenv("FPMFORGE_THREADS", "3", 1);
  CHECK(worker_count() == 3);
  ::setenv("FPMFORGE_THREADS", "zero", 1);
  CHECK_THROWS_AS(worker_count(), FpmError);
  ::unsetenv("FPMFORGE_THREADS");
  CHECK(worker_count() >= 1);
}

TEST_CASE("phase profile sampling") {
  ComplexField f(8, 6, Space::Spatial);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 8; ++x) f(x, y) = std::polar(1.0, 0.1 * x);
  }
  const auto p = phase_profile(f, {0, 2, 7, 2});
  REQUIRE(p.size() == 8);
  for (int x = 0; x < 8; ++x) CHECK(p[x] == doctest::Approx(0.1 * x));
  CHECK(phase_profile(f, {0, 0, 5, 5}).size() == 6);
  CHECK(phase_profile(f, {3, 1, 3, 1}).size() == 1);
  CHECK_THROWS_AS(phase_profile(f, {0, 0, 8, 0}), FpmError);
}

TEST_CASE("command flow on a small simulated dataset") {
  testutil::TempDir dir("cli");
  const fs::path root = dir.path;
  const fs::path cfg = write_config(root, small_config_json());
  const fs::path data = root / "data";

  std::string log;
  REQUIRE(run("simulate", opts(cfg, {}, data), &log) == kExitOk);
  CHECK(fs::exists(data / "manifest.json"));
  CHECK(fs::exists(data / "dark.png"));
  CHECK(fs::exists(data / "truth.cf2d"));
  CHECK(fs::exists(data / "noise_truth.json"));
  const Dataset ds = load_dataset(data);
  CHECK(ds.stack.size() == 25);
  CHECK(ds.truth.has_value());

  SUBCASE("preprocess writes a processed dataset") {
    REQUIRE(run("preprocess", opts(cfg, data, root / "prep"), &log) == kExitOk);
    const json report = json::parse(read_text(root / "prep" / "preprocess_report.json"));
    CHECK(report["images"].size() == 25);
    CHECK(report["i_th"].get<double>() == 0.0);
    CHECK(report.contains("threshold_bound"));
    const Dataset processed = load_dataset(root / "prep" / "processed");
    CHECK(processed.manifest.processed);
    CHECK(processed.validity.size() == 25);
    CHECK(run("reconstruct", opts(cfg, root / "prep" / "processed", root / "from_processed")) == kExitOk);
    CHECK(run("preprocess", opts(cfg, root / "prep" / "processed", root / "again")) == kExitError);
  }

  SUBCASE("reconstruct writes the run artifacts") {
    REQUIRE(run("reconstruct", opts(cfg, data, root / "run"), &log) == kExitOk);
    for (const char* f : {"object.cf2d", "pupil.cf2d", "amplitude.png", "phase.png", "spectrum.png", "error_log.csv",
                          "run_summary.json"}) {
      CHECK(fs::exists(root / "run" / f));
    }
    const json s = json::parse(read_text(root / "run" / "run_summary.json"));
    CHECK(s["iterations_run"] == 4);
    CHECK(s.contains("rmse"));
    CHECK(s["preprocessed"] == true);
    const auto log_lines = lines_of(read_text(root / "run" / "error_log.csv"));
    CHECK(log_lines.front() == "iteration,fidelity");
    CHECK(log_lines.size() == 5);
    const ComplexField obj = load_cf2d(root / "run" / "object.cf2d");
    CHECK(obj.width() == 64);
  }

  SUBCASE("report tabulates run summaries") {
    REQUIRE(run("reconstruct", opts(cfg, data, root / "r1")) == kExitOk);
    REQUIRE(run("reconstruct", opts(cfg, data, root / "r2")) == kExitOk);
    CommandOptions o;
    o.datasets = {root / "r1", root / "r2"};
    o.out = root / "rep";
    REQUIRE(run("report", o) == kExitOk);
    const auto rows = lines_of(read_text(root / "rep" / "report.csv"));
    REQUIRE(rows.size() == 3);
    const auto header = split(rows[0]);
    CHECK(header == report_columns());
    auto a = split(rows[1]);
    auto b = split(rows[2]);
    REQUIRE(a.size() == header.size());
    REQUIRE(b.size() == header.size());
    a.erase(a.begin());
    b.erase(b.begin());
    CHECK(a == b);
    CHECK(json::parse(read_text(root / "rep" / "report.json")).size() == 2);

    write_text(root / "r2" / "run_summary.json", "{ broken");
    CHECK(run("report", o) == kExitWarnings);
    o.datasets = {root / "r2"};
    CHECK(run("report", o) == kExitError);
  }

  SUBCASE("sweep writes one row per threshold") {
    json j = small_config_json();
    j["sweep"] = {{"values", {0.01}}, {"line", {0, 10, 20, 10}}};
    const fs::path c2 = write_config(root, j, "sweep.json");
    REQUIRE(run("sweep-threshold", opts(c2, data, root / "sweep")) == kExitOk);
    const auto rows = lines_of(read_text(root / "sweep" / "sweep.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(split(rows[0]).size() == 4 + 21);
    CHECK(split(rows[1]).size() == 4 + 21);
    CHECK(split(rows[0])[4] == "p_0");
    CHECK(fs::exists(root / "sweep" / "phase_ith_0.0100.png"));
    j["sweep"] = {{"values", json::array()}};
    CHECK(run("sweep-threshold", opts(write_config(root, j, "empty.json"), data, root / "s2")) == kExitError);
  }

  SUBCASE("missing ground truth omits rmse") {
    DatasetManifest m = manifest_from_json(read_text(data / "manifest.json"));
    m.ground_truth.clear();
    write_text(data / "manifest.json", manifest_to_json(m));
    fs::remove(data / "truth.cf2d");
    REQUIRE(run("reconstruct", opts(cfg, data, root / "nt")) == kExitOk);
    const json s = json::parse(read_text(root / "nt" / "run_summary.json"));
    CHECK((!s.contains("rmse") || s["rmse"].is_null()));
  }

  SUBCASE("a corrupted manifest is an error") {
    std::string text = read_text(data / "manifest.json");
    text.insert(text.find('\n') + 1, "{{");
    write_text(data / "manifest.json", text);
    CHECK(run("reconstruct", opts(cfg, data, root / "bad"), &log) == kExitError);
    CHECK(log.find("error:") != std::string::npos);
    CHECK(log.find("line") != std::string::npos);
  }

  SUBCASE("heavy saturation is reported as a warning") {
    for (const auto& im : ds.manifest.images) {
      Image2D img = load_png16(data / im.file, 16);
      for (std::size_t p = 0; p < img.size(); p += 5) img[p] = 65535.0;
      save_png16(data / im.file, img);
    }
    CHECK(run("preprocess", opts(cfg, data, root / "sat"), &log) == kExitWarnings);
    CHECK(log.find("15% guideline") != std::string::npos);
  }

  SUBCASE("unknown commands and missing options fail") {
    CHECK(run("bogus", opts(cfg, data, root / "x")) == kExitError);
    CHECK(run("reconstruct", opts(root / "nope.json", data, root / "x")) == kExitError);
    CHECK(run("reconstruct", opts(cfg, root / "nowhere", root / "x")) == kExitError);
  }
}

TEST_CASE("simulate is deterministic in the seed") {
  testutil::TempDir dir("cli");
  json j = small_config_json();
  j["simulate"]["noise"] = {{"gaussian_sigma", 0.01}, {"dark_mean", 0.02}, {"stray_fraction", 0.5}};
  const fs::path cfg = write_config(dir.path, j);
  REQUIRE(run("simulate", opts(cfg, {}, dir.path / "a")) == kExitOk);
  REQUIRE(run("simulate", opts(cfg, {}, dir.path / "b")) == kExitOk);
  CommandOptions other = opts(cfg, {}, dir.path / "c");
  other.seed = 4;
  REQUIRE(run("simulate", other) == kExitOk);
  bool differs = false;
  for (const auto& e : fs::directory_iterator(dir.path / "a")) {
    const auto name = e.path().filename();
    CHECK(read_text(e.path()) == read_text(dir.path / "b" / name));
    if (name.extension() == ".png" && name != "dark.png") {
      differs = differs || read_text(e.path()) != read_text(dir.path / "c" / name);
    }
  }
  CHECK(differs);
  const json truth = json::parse(read_text(dir.path / "a" / "noise_truth.json"));
  CHECK(truth["seed"] == 3);
  CHECK(json::parse(read_text(dir.path / "c" / "noise_truth.json"))["seed"] == 4);
}

TEST_CASE("zero noise gives an all-zero dark frame") {
  testutil::TempDir dir("cli");
  json j = small_config_json();
  j["simulate"]["noise"] = json::object();
  const fs::path cfg = write_config(dir.path, j);
  REQUIRE(run("simulate", opts(cfg, {}, dir.path / "d")) == kExitOk);
  const Image2D dark = load_png16(dir.path / "d" / "dark.png", 16);
  for (double v : dark.values()) CHECK(v == 0.0);
  CHECK(json::parse(read_text(dir.path / "d" / "noise_truth.json"))["stray_blobs"].empty());
}

TEST_CASE("preprocessing helps on a noisy small dataset") {
  testutil::TempDir dir("cli");
  json j = small_config_json();
  j["i_th"] = 0.02;
  j["epry"] = {{"iterations", 15}};
  j["simulate"] = {{"hr_size", 128},
                   {"active_side", 9},
                   {"exposure_jitter", 0.1},
                   {"noise",
                    {{"gaussian_sigma", 0.01},
                     {"dark_mean", 0.02},
                     {"dark_gradient", 0.01},
                     {"stray_fraction", 0.1}}}};
  const fs::path cfg = write_config(dir.path, j);
  const fs::path data = dir.path / "data";
  REQUIRE(run("simulate", opts(cfg, {}, data)) == kExitOk);
  REQUIRE(run("reconstruct", opts(cfg, data, dir.path / "full")) != kExitError);
  CommandOptions raw = opts(cfg, data, dir.path / "raw");
  raw.no_preprocess = true;
  REQUIRE(run("reconstruct", raw) != kExitError);
  const json full = json::parse(read_text(dir.path / "full" / "run_summary.json"));
  const json none = json::parse(read_text(dir.path / "raw" / "run_summary.json"));
  CHECK(none["preprocessed"] == false);
  CHECK(full["rmse"].get<double>() < none["rmse"].get<double>());
}
