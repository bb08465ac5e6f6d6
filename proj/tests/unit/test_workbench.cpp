#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "oracles.hpp"
#include "pinball/workbench.hpp"

using namespace pinball;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(auto&& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Precondition;
}

struct TempDir {
  fs::path path;
  explicit TempDir(std::string_view name) {
    path = fs::temp_directory_path() / fmt_name(name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static std::string fmt_name(std::string_view name) {
    return "pinball-test-" + std::string(name) + "-" + std::to_string(::getpid());
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const Configuration& r6() {
  static const Configuration c = Configuration::equilateral(6.0);
  return c;
}

const OrbitDatabase& r6_db() {
  static const OrbitDatabase db = sweep_orbits(r6(), 6);
  return db;
}

std::string saved_db() {
  std::ostringstream out;
  write_orbits(r6_db(), r6(), out);
  return out.str();
}

RunConfig r6_config(const fs::path& out, int m_max) {
  RunConfig c;
  c.disks = equilateral_disks(6.0);
  c.m_max = m_max;
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(
      "# comment\n"
      "[geometry]\n"
      "disk 0 0 1\n"
      "disk 7.3 0.4 0.8   # trailing comment\n"
      "disk 3.1 6.2 1.1\n"
      "[sweep]\n"
      "m_max = 7\n"
      "group_tol = 1e-8\n"
      "[analysis]\n"
      "delta = 4.5\n"
      "b_windows = 10, 11.5\n"
      "[output]\n"
      "dir = results\n"
      "formats = csv\n");
  REQUIRE(c.disks.size() == 3);
  CHECK(c.disks[1].center.x == 7.3);
  CHECK(c.disks[2].radius == 1.1);
  CHECK(c.m_max == 7);
  CHECK(c.group_tol == 1e-8);
  CHECK(c.delta == 4.5);
  CHECK(c.b_windows == std::vector<double>{10.0, 11.5});
  CHECK(c.output_dir == fs::path("results"));
  CHECK(c.write_csv);
  CHECK(!c.write_json);

  const auto eq = parse_config("[geometry]\nequilateral = 6\nradius = 1\n");
  REQUIRE(eq.disks.size() == 3);
  CHECK(std::hypot(eq.disks[0].center.x - eq.disks[1].center.x, eq.disks[0].center.y - eq.disks[1].center.y) ==
        doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("config errors carry the line") {
  std::string msg;
  CHECK(kind_of([] { parse_config("[sweep]\nm_max = 7\nm_max = seven\n", "run.ini"); }, &msg) == ErrorKind::Parse);
  CHECK(msg.find("run.ini:3") != std::string::npos);
  CHECK(kind_of([] { parse_config("[geometry]\ndisk 0 0\n", "g.ini"); }, &msg) == ErrorKind::Parse);
  CHECK(msg.find("g.ini:2") != std::string::npos);
  CHECK(kind_of([] { parse_config("m_max = 3\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_config("[nowhere]\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_config("[sweep]\nbogus = 1\n"); }) == ErrorKind::Parse);
}

TEST_CASE("overrides, validation and the canonical form") {
  auto c = r6_config("out", 8);
  apply_override(c, "analysis.delta=4");
  apply_override(c, "sweep.m_max = 5");
  CHECK(c.delta == 4.0);
  CHECK(c.m_max == 5);
  CHECK(kind_of([&] { apply_override(c, "delta=4"); }) == ErrorKind::Parse);

  const auto round = parse_config(canonical_text(c));
  CHECK(canonical_text(round) == canonical_text(c));
  CHECK(config_hash(round) == config_hash(c));

  auto moved = c;
  moved.output_dir = "elsewhere";
  CHECK(config_hash(moved) == config_hash(c));
  apply_override(moved, "analysis.gamma=7");
  CHECK(config_hash(moved) != config_hash(c));

  auto bad = c;
  bad.m_max = 1;
  CHECK(kind_of([&] { validate_config(bad); }) == ErrorKind::InvalidConfiguration);
  bad = c;
  bad.eta = 0.5;
  CHECK(kind_of([&] { validate_config(bad); }) == ErrorKind::InvalidConfiguration);
  bad = c;
  bad.solver_tol = 0.0;
  CHECK(kind_of([&] { validate_config(bad); }) == ErrorKind::InvalidConfiguration);
}

TEST_CASE("bundled configurations load") {
  const fs::path root = PINBALL_SOURCE_DIR;
  for (const char* name : {"configs/three_disk_r6.ini", "configs/four_disk_generic.ini"}) {
    const auto c = load_config(root / name);
    CHECK_NOTHROW(validate_config(c));
    CHECK(validate_non_eclipse(Configuration(c.disks)).ok);
  }
}

TEST_CASE("orbit database round trip") {
  const auto text = saved_db();
  std::istringstream in(text);
  const auto back = read_orbits(in, r6());
  const auto& db = r6_db();
  CHECK(back.m_max == db.m_max);
  REQUIRE(back.records.size() == db.records.size());
  for (std::size_t i = 0; i < db.records.size(); ++i) {
    const auto& a = db.records[i].orbit;
    const auto& b = back.records[i].orbit;
    CHECK(a.word == b.word);
    CHECK(a.m == b.m);
    CHECK(a.tau == b.tau);
    CHECK(a.tau_primitive == b.tau_primitive);
    CHECK(a.angles == b.angles);
    CHECK(a.residual == b.residual);
    CHECK(a.iterations == b.iterations);
    CHECK(a.repetition == b.repetition);
    CHECK(back.records[i].monodromy.trace == db.records[i].monodromy.trace);
    CHECK(back.records[i].monodromy.det_id_minus == db.records[i].monodromy.det_id_minus);
  }
  std::ostringstream again;
  write_orbits(back, r6(), again);
  CHECK(again.str() == text);
}

TEST_CASE("truncated orbit file is a parse error at the cut line") {
  const auto text = saved_db();
  std::size_t cut = text.size() / 2;
  while (text[cut] == '\t' || text[cut] == '\n') ++cut;
  const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(cut), '\n'));
  std::istringstream in(text.substr(0, cut));
  std::string msg;
  CHECK(kind_of([&] { read_orbits(in, r6(), 1e-12, "orbits.tsv"); }, &msg) == ErrorKind::Parse);
  CHECK(msg.find("orbits.tsv:" + std::to_string(line) + ":") != std::string::npos);
}

TEST_CASE("edited records fail integrity") {
  const auto text = saved_db();
  const auto row = text.find("\n12\t");
  REQUIRE(row != std::string::npos);
  const auto tau_start = text.find('\t', text.find('\t', row + 1) + 1) + 1;
  const auto tau_end = text.find('\t', tau_start);
  REQUIRE(text.substr(tau_start, tau_end - tau_start) == "8");
  std::string edited = text;
  edited.replace(tau_start, tau_end - tau_start, "8.001");
  std::istringstream in(edited);
  CHECK(kind_of([&] { read_orbits(in, r6()); }) == ErrorKind::Integrity);

  const auto other = Configuration::equilateral(6.5);
  std::istringstream wrong(text);
  CHECK(kind_of([&] { read_orbits(wrong, other); }) == ErrorKind::Integrity);
}

TEST_CASE("spectrum csv round trip") {
  const auto spec = build_spectrum(r6_db(), r6_db().coverage(), default_group_tol(r6_db().d0));
  std::istringstream in(spectrum_csv(spec, "0"));
  const auto back = read_spectrum_csv(in, spec.x_max(), spec.group_tol());
  REQUIRE(back.size() == spec.size());
  for (std::size_t n = 0; n < spec.size(); ++n) {
    CHECK(back.lambda(n) == spec.lambda(n));
    CHECK(back.a(n) == spec.a(n));
  }
}

TEST_CASE("pipeline through the spectrum at m_max 6") {
  TempDir dir("spectrum");
  PipelineOptions options;
  options.last = Stage::Spectrum;
  const auto r = run_pipeline(r6_config(dir.path, 6), options);
  std::size_t expected = 0;
  for (int m = 2; m <= 6; ++m) expected += oracle::brute_force_classes(3, m).size();
  CHECK(r.db.records.size() == expected);
  for (const auto& rec : r.db.records) CHECK(rec.orbit.residual <= 1e-12);
  CHECK(fs::exists(dir.path / "orbits.tsv"));
  CHECK(fs::exists(dir.path / "spectrum.csv"));
  CHECK(fs::exists(dir.path / "spectrum.json"));
}

TEST_CASE("invalid geometry fails at the geometry stage and writes nothing") {
  TempDir dir("geometry");
  const auto out = dir.path / "run";
  auto c = r6_config(out, 6);
  c.disks = equilateral_disks(2.2);
  try {
    run_pipeline(c);
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == Stage::Geometry);
    CHECK(std::string(e.what()).find("geometry") != std::string::npos);
  }
  CHECK(!fs::exists(out));
}

TEST_CASE("reruns and cached runs are byte identical") {
  TempDir dir("determinism");
  const auto cold_dir = dir.path / "cold";
  const auto c = r6_config(cold_dir, 8);

  const auto first = run_pipeline(c);
  REQUIRE(!first.orbits_from_cache);
  std::map<std::string, std::string> cold;
  for (const auto& p : first.written) cold[p.filename().string()] = slurp(p);
  CHECK(cold.count("criteria.json") == 1);
  CHECK(cold.count("analysis.json") == 1);
  CHECK(cold.count("intervals.csv") == 1);

  const auto cached = run_pipeline(c);
  CHECK(cached.orbits_from_cache);
  for (const auto& p : cached.written) CHECK(slurp(p) == cold[p.filename().string()]);

  PipelineOptions fresh;
  fresh.reuse_orbits = false;
  fresh.workers = 4;
  const auto parallel = run_pipeline(c, fresh);
  CHECK(!parallel.orbits_from_cache);
  for (const auto& p : parallel.written) CHECK(slurp(p) == cold[p.filename().string()]);
}

TEST_CASE("stage names") {
  CHECK(to_string(Stage::Geometry) == "geometry");
  CHECK(to_string(Stage::Criteria) == "criteria");
}
