#include "pinball/workbench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "pinball/parallel.hpp"

namespace pinball {

using json = nlohmann::ordered_json;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<long long> to_int(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

json jnum(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

// Applies one key; `where` prefixes error messages.
void set_key(RunConfig& c, std::string_view section, std::string_view key, std::string_view value,
             const std::string& where) {
  auto bad = [&](std::string_view what) -> void {
    fail(ErrorKind::Parse, fmt::format("{}: {} for {}.{}: '{}'", where, what, section, key, value));
  };
  auto real = [&]() {
    const auto v = to_double(value);
    if (!v) bad("expected a number");
    return *v;
  };
  auto integer = [&]() {
    const auto v = to_int(value);
    if (!v) bad("expected an integer");
    return *v;
  };

  if (section == "geometry") {
    if (key == "equilateral") {
      const double radius = c.disks.empty() ? 1.0 : c.disks.front().radius;
      c.disks = equilateral_disks(real(), radius);
    } else {
      bad("unknown key");
    }
  } else if (section == "sweep") {
    if (key == "m_max") c.m_max = static_cast<int>(integer());
    else if (key == "x_max") c.x_max = real();
    else if (key == "group_tol") c.group_tol = real();
    else if (key == "solver_tol") c.solver_tol = real();
    else bad("unknown key");
  } else if (section == "analysis") {
    if (key == "eps") c.eps = real();
    else if (key == "window_eps") c.window_eps = real();
    else if (key == "eta") c.eta = real();
    else if (key == "delta") c.delta = real();
    else if (key == "gamma") c.gamma = real();
    else if (key == "C") c.C = real();
    else if (key == "cluster_eps") c.cluster_eps = real();
    else if (key == "q_max") c.q_max = integer();
    else if (key == "tol_rational") c.tol_rational = real();
    else if (key == "b_windows") {
      c.b_windows.clear();
      if (!trim(value).empty()) {
        for (auto item : split(value, ',')) {
          const auto v = to_double(item);
          if (!v) bad("expected a comma separated list of numbers");
          c.b_windows.push_back(*v);
        }
      }
    } else {
      bad("unknown key");
    }
  } else if (section == "output") {
    if (key == "dir") {
      c.output_dir = std::string(trim(value));
    } else if (key == "formats") {
      c.write_csv = c.write_json = false;
      for (auto item : split(value, ',')) {
        item = trim(item);
        if (item == "csv") c.write_csv = true;
        else if (item == "json") c.write_json = true;
        else bad("unknown format");
      }
    } else {
      bad("unknown key");
    }
  } else {
    bad("unknown section");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig parse_config(std::string_view text, std::string_view origin) {
  RunConfig c;
  std::string section;
  std::size_t line_no = 0;
  bool explicit_disks = false;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    const std::string where = fmt::format("{}:{}", origin, line_no);
    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorKind::Parse, where + ": unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "geometry" && section != "sweep" && section != "analysis" && section != "output") {
        fail(ErrorKind::Parse, fmt::format("{}: unknown section [{}]", where, section));
      }
      continue;
    }
    if (section.empty()) fail(ErrorKind::Parse, where + ": key outside any section");
    if (section == "geometry" && line.starts_with("disk") && line.find('=') == std::string_view::npos) {
      const auto fields = split_ws(line);
      if (fields.size() != 4 || fields[0] != "disk") {
        fail(ErrorKind::Parse, where + ": expected 'disk cx cy r'");
      }
      const auto cx = to_double(fields[1]);
      const auto cy = to_double(fields[2]);
      const auto r = to_double(fields[3]);
      if (!cx || !cy || !r) fail(ErrorKind::Parse, where + ": disk fields must be numbers");
      if (!explicit_disks) c.disks.clear();
      explicit_disks = true;
      c.disks.push_back({{*cx, *cy}, *r});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::Parse, where + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (section == "geometry" && key == "radius") {
      const auto r = to_double(value);
      if (!r) fail(ErrorKind::Parse, where + ": radius must be a number");
      for (auto& d : c.disks) d.radius = *r;
      if (c.disks.empty()) c.disks.push_back({{0.0, 0.0}, *r});
      continue;
    }
    set_key(c, section, key, value, where);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    fail(ErrorKind::Parse, fmt::format("override '{}' is not section.key=value", assignment));
  }
  const auto section = trim(assignment.substr(0, dot));
  const auto key = trim(assignment.substr(dot + 1, eq - dot - 1));
  const auto value = trim(assignment.substr(eq + 1));
  if (section == "geometry" && key == "radius") {
    const auto r = to_double(value);
    if (!r) fail(ErrorKind::Parse, "override geometry.radius must be a number");
    for (auto& d : config.disks) d.radius = *r;
    return;
  }
  set_key(config, section, key, value, "override");
}

void validate_config(const RunConfig& c) {
  auto check = [](bool ok, std::string_view what) {
    if (!ok) fail(ErrorKind::InvalidConfiguration, std::string(what));
  };
  check(c.m_max >= 2 && c.m_max <= 40, "sweep.m_max must lie in [2, 40]");
  check(c.solver_tol > 0.0, "sweep.solver_tol must be positive");
  check(!c.group_tol || *c.group_tol > 0.0, "sweep.group_tol must be positive");
  check(!c.x_max || *c.x_max > 0.0, "sweep.x_max must be positive");
  check(c.eps > 0.0 && c.eps < 1.0, "analysis.eps must lie in (0, 1)");
  check(c.window_eps > 0.0 && c.window_eps < 0.5, "analysis.window_eps must lie in (0, 1/2)");
  check(c.eta > 0.0 && c.eta < c.window_eps / (12.0 * (1.0 + c.window_eps)),
        "analysis.eta must lie in (0, window_eps / (12 (1 + window_eps)))");
  check(!c.delta || *c.delta > 0.0, "analysis.delta must be positive");
  check(!c.gamma || *c.gamma > 0.0, "analysis.gamma must be positive");
  check(c.C > 0.0, "analysis.C must be positive");
  check(c.cluster_eps > 0.0 && c.cluster_eps < 1.0, "analysis.cluster_eps must lie in (0, 1)");
  check(c.q_max >= 1, "analysis.q_max must be >= 1");
  check(c.tol_rational > 0.0, "analysis.tol_rational must be positive");
  for (double b : c.b_windows) check(b > 0.0, "analysis.b_windows entries must be positive");
  check(c.write_csv || c.write_json, "output.formats must name csv and/or json");
}

std::string canonical_text(const RunConfig& c) {
  std::string out = "[geometry]\n";
  for (const auto& d : c.disks) out += fmt::format("disk {} {} {}\n", num(d.center.x), num(d.center.y), num(d.radius));
  out += "\n[sweep]\n";
  out += fmt::format("m_max = {}\n", c.m_max);
  if (c.x_max) out += fmt::format("x_max = {}\n", num(*c.x_max));
  if (c.group_tol) out += fmt::format("group_tol = {}\n", num(*c.group_tol));
  out += fmt::format("solver_tol = {}\n", num(c.solver_tol));
  out += "\n[analysis]\n";
  out += fmt::format("eps = {}\nwindow_eps = {}\neta = {}\n", num(c.eps), num(c.window_eps), num(c.eta));
  if (c.delta) out += fmt::format("delta = {}\n", num(*c.delta));
  if (c.gamma) out += fmt::format("gamma = {}\n", num(*c.gamma));
  out += fmt::format("C = {}\n", num(c.C));
  std::vector<std::string> bs;
  for (double b : c.b_windows) bs.push_back(num(b));
  out += fmt::format("b_windows = {}\n", fmt::join(bs, ","));
  out += fmt::format("cluster_eps = {}\nq_max = {}\ntol_rational = {}\n", num(c.cluster_eps), c.q_max,
                     num(c.tol_rational));
  out += "\n[output]\n";
  out += fmt::format("dir = {}\n", c.output_dir.generic_string());
  std::vector<std::string> formats;
  if (c.write_csv) formats.emplace_back("csv");
  if (c.write_json) formats.emplace_back("json");
  out += fmt::format("formats = {}\n", fmt::join(formats, ","));
  return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& config) {
  // The output directory does not influence any result.
  RunConfig copy = config;
  copy.output_dir = "";
  return fmt::format("{:016x}", fnv1a(canonical_text(copy)));
}

std::string geometry_hash(std::span<const Disk> disks) {
  std::string text;
  for (const auto& d : disks) text += fmt::format("{} {} {}\n", num(d.center.x), num(d.center.y), num(d.radius));
  return fmt::format("{:016x}", fnv1a(text));
}

// ---------------------------------------------------------------------------

namespace {

struct OrbitHeader {
  int m_max = 0;
  std::string geometry;
  double solver_tol = 0.0;
};

std::string header_line(const OrbitDatabase& db, const Configuration& config, double solver_tol) {
  return fmt::format("# orbit-db v1 m_max={} coverage={} geometry={} solver_tol={}", db.m_max, num(db.coverage()),
                     geometry_hash(config.disks()), num(solver_tol));
}

OrbitHeader parse_header(std::string_view line, std::string_view origin) {
  if (!line.starts_with("# orbit-db v1")) fail(ErrorKind::Parse, fmt::format("{}:1: missing orbit-db header", origin));
  OrbitHeader h;
  bool have_m = false;
  for (auto field : split_ws(line)) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "m_max") {
      const auto v = to_int(value);
      if (!v) fail(ErrorKind::Parse, fmt::format("{}:1: bad m_max", origin));
      h.m_max = static_cast<int>(*v);
      have_m = true;
    } else if (key == "geometry") {
      h.geometry = std::string(value);
    } else if (key == "solver_tol") {
      h.solver_tol = to_double(value).value_or(0.0);
    }
  }
  if (!have_m) fail(ErrorKind::Parse, fmt::format("{}:1: header lacks m_max", origin));
  return h;
}

std::optional<OrbitHeader> peek_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) return std::nullopt;
  try {
    return parse_header(line, path.string());
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

void write_orbits(const OrbitDatabase& db, const Configuration& config, std::ostream& out, double solver_tol) {
  out << header_line(db, config, solver_tol) << '\n';
  out << "# word\tm\ttau\ttau_primitive\tangles\ttrace\tdet_id_minus\tresidual\titerations\n";
  for (const auto& r : db.records) {
    const auto& o = r.orbit;
    std::vector<std::string> angles;
    for (double a : o.angles) angles.push_back(num(a));
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", o.word.str(), o.m, num(o.tau), num(o.tau_primitive),
                       fmt::join(angles, ","), num(r.monodromy.trace), num(r.monodromy.det_id_minus),
                       num(o.residual), o.iterations);
  }
}

void save_orbits(const OrbitDatabase& db, const Configuration& config, const std::filesystem::path& path,
                 double solver_tol) {
  std::ostringstream out;
  write_orbits(db, config, out, solver_tol);
  write_file(path, out.str());
}

OrbitDatabase read_orbits(std::istream& in, const Configuration& config, double solver_tol, std::string_view origin) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Parse, fmt::format("{}:1: empty orbit database", origin));
  const OrbitHeader header = parse_header(line, origin);
  if (header.m_max < 2) fail(ErrorKind::Parse, fmt::format("{}:1: m_max must be >= 2", origin));
  if (header.geometry != geometry_hash(config.disks())) {
    fail(ErrorKind::Integrity, fmt::format("{}:1: orbit database belongs to a different geometry", origin));
  }

  OrbitDatabase db;
  db.m_max = header.m_max;
  db.d0 = config.d0();
  const double residual_tol = std::max(solver_tol * 4.0, 1e-10 * config.d0());
  std::map<Word, Monodromy> primitives;
  std::size_t line_no = 1;
  bool saw_newline_end = true;
  while (std::getline(in, line)) {
    ++line_no;
    saw_newline_end = !in.eof();
    const std::string where = fmt::format("{}:{}", origin, line_no);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 9) fail(ErrorKind::Parse, fmt::format("{}: expected 9 fields, found {}", where, fields.size()));

    OrbitRecord record;
    PeriodicOrbit& o = record.orbit;
    try {
      o.word = Word::parse(fields[0]);
    } catch (const Error& e) {
      fail(ErrorKind::Parse, fmt::format("{}: bad word '{}'", where, fields[0]));
    }
    const auto m = to_int(fields[1]);
    const auto tau = to_double(fields[2]);
    const auto tau_p = to_double(fields[3]);
    const auto trace = to_double(fields[5]);
    const auto det = to_double(fields[6]);
    const auto residual = to_double(fields[7]);
    const auto iterations = to_int(fields[8]);
    if (!m || !tau || !tau_p || !trace || !det || !residual || !iterations) {
      fail(ErrorKind::Parse, where + ": malformed numeric field");
    }
    for (auto a : split(fields[4], ',')) {
      const auto v = to_double(a);
      if (!v) fail(ErrorKind::Parse, where + ": malformed angle list");
      o.angles.push_back(*v);
    }
    for (Symbol s : o.word.symbols()) {
      if (s >= config.size()) fail(ErrorKind::Integrity, where + ": word names a missing disk");
    }
    o.itinerary.assign(o.word.symbols().begin(), o.word.symbols().end());
    o.m = static_cast<int>(*m);
    o.tau = *tau;
    o.tau_primitive = *tau_p;
    o.repetition = primitive_decomposition(o.word).repetition;
    o.residual = *residual;
    o.iterations = static_cast<int>(*iterations);
    if (o.angles.size() != o.word.length()) fail(ErrorKind::Integrity, where + ": angle count does not match the word");
    for (std::size_t i = 0; i < o.angles.size(); ++i) o.points.push_back(config.disk(o.itinerary[i]).boundary_point(o.angles[i]));
    const std::size_t n = o.points.size();
    for (std::size_t i = 0; i < n; ++i) {
      o.incidence_cosines.push_back(dot(polar(o.angles[i]), unit(o.points[(i + 1) % n] - o.points[i])));
    }
    try {
      certify_orbit(config, o, residual_tol);
      if (o.repetition == 1) {
        record.monodromy = poincare_map(config, o);
        primitives.emplace(o.word, record.monodromy);
      } else {
        const auto dec = primitive_decomposition(o.word);
        const auto it = primitives.find(dec.primitive);
        if (it == primitives.end()) fail(ErrorKind::Integrity, "primitive " + dec.primitive.str() + " missing");
        record.monodromy = repeat(it->second, dec.repetition);
      }
    } catch (const Error& e) {
      fail(ErrorKind::Integrity, fmt::format("{}: {}", where, e.what()));
    }
    const double scale = std::max(std::abs(*trace), 1.0);
    if (std::abs(record.monodromy.trace - *trace) > 1e-9 * scale ||
        std::abs(record.monodromy.det_id_minus - *det) > 1e-9 * std::max(*det, 1.0)) {
      fail(ErrorKind::Integrity, where + ": stored stability data disagree with the orbit");
    }
    if (!db.records.empty() && !(db.records.back().orbit.word < o.word)) {
      fail(ErrorKind::Integrity, where + ": records out of order or duplicated");
    }
    db.records.push_back(std::move(record));
  }
  if (!saw_newline_end) fail(ErrorKind::Parse, fmt::format("{}:{}: truncated record", origin, line_no));
  const auto expected = enumerate_words(static_cast<int>(config.size()), db.m_max).size();
  if (db.records.size() != expected) {
    fail(ErrorKind::Integrity, fmt::format("{}:{}: {} records, expected {}", origin, line_no + 1, db.records.size(), expected));
  }
  return db;
}

OrbitDatabase load_orbits(const std::filesystem::path& path, const Configuration& config, double solver_tol) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  return read_orbits(in, config, solver_tol, path.string());
}

// ---------------------------------------------------------------------------

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Config: return "config";
    case Stage::Geometry: return "geometry";
    case Stage::Sweep: return "sweep";
    case Stage::Spectrum: return "spectrum";
    case Stage::Analysis: return "analysis";
    case Stage::Criteria: return "criteria";
    case Stage::Output: return "output";
  }
  return "unknown";
}

PipelineError::PipelineError(Stage stage, const Error& cause)
    : Error(cause.kind(), fmt::format("stage {}: {}: {}", to_string(stage), to_string(cause.kind()), cause.what())),
      stage_(stage) {}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Exports

std::string spectrum_csv(const Spectrum& spec, std::string_view hash) {
  std::string out = fmt::format("# spectrum config={} x_max={} group_tol={}\n", hash, num(spec.x_max()),
                                num(spec.group_tol()));
  out += "index,lambda,a,n_contributors\n";
  for (std::size_t n = 0; n < spec.size(); ++n) {
    const auto& l = spec.line(n);
    out += fmt::format("{},{},{},{}\n", n + 1, num(l.lambda), num(l.a), l.contributors.size());
  }
  return out;
}

Spectrum read_spectrum_csv(std::istream& in, double x_max, double group_tol, std::string_view origin) {
  std::string line;
  std::vector<SpectrumLine> lines;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#' || line.starts_with("index")) continue;
    const auto fields = split(line, ',');
    const auto lambda = fields.size() >= 3 ? to_double(fields[1]) : std::nullopt;
    const auto a = fields.size() >= 3 ? to_double(fields[2]) : std::nullopt;
    if (!lambda || !a) fail(ErrorKind::Parse, fmt::format("{}:{}: malformed spectrum row", origin, line_no));
    SpectrumLine l;
    l.lambda = *lambda;
    l.a = *a;
    lines.push_back(std::move(l));
  }
  return Spectrum::from_lines(std::move(lines), x_max, group_tol);
}

std::string spectrum_json(const Spectrum& spec, std::string_view hash) {
  json doc;
  doc["config"] = hash;
  doc["x_max"] = spec.x_max();
  doc["group_tol"] = spec.group_tol();
  doc["warnings"] = spec.warnings();
  json lines = json::array();
  for (std::size_t n = 0; n < spec.size(); ++n) {
    const auto& l = spec.line(n);
    json contributors = json::array();
    for (const auto& c : l.contributors) {
      contributors.push_back({{"word", c.word.str()}, {"repetition", c.repetition}, {"tau", c.tau}, {"term", c.term}});
    }
    lines.push_back({{"index", n + 1}, {"lambda", l.lambda}, {"a", l.a}, {"contributors", contributors}});
  }
  doc["lines"] = lines;
  return doc.dump(2) + "\n";
}

namespace {

json abscissa_json(const AbscissaEstimate& e) {
  json idx = json::array();
  for (auto i : e.indices) idx.push_back(i + 1);
  json skipped = json::array();
  for (auto i : e.skipped) skipped.push_back(i + 1);
  json proxies = json::array();
  for (double p : e.proxies) proxies.push_back(jnum(p));
  return {{"value", jnum(e.value)}, {"uncertainty", jnum(e.uncertainty)}, {"degenerate", e.degenerate},
          {"valid", e.valid},       {"indices", idx},                    {"proxies", proxies},
          {"skipped", skipped}};
}

std::string_view verdict_name(WindowVerdict v) {
  switch (v) {
    case WindowVerdict::Pass: return "pass";
    case WindowVerdict::Fail: return "fail";
    case WindowVerdict::OutOfRange: return "out-of-range";
  }
  return "";
}

json complex_json(std::complex<double> z) { return {{"re", jnum(z.real())}, {"im", jnum(z.imag())}}; }

}  // namespace

std::string analysis_json(const AnalysisReport& r, std::string_view hash) {
  json doc;
  doc["config"] = hash;
  doc["entropy"] = {{"h", r.h.h},           {"c", r.h.c},        {"x_lo", r.h.x_lo},
                    {"x_hi", r.h.x_hi},     {"residual", r.h.residual}, {"ci", r.h.ci},
                    {"samples", r.h.samples}, {"iterations", r.h.iterations}};
  std::size_t failing = 0;
  for (const auto& s : r.band.samples) failing += !(s.lower_ok && s.upper_ok);
  doc["counting_band"] = {{"h", r.band.h},
                          {"eps", r.band.eps},
                          {"onset", jnum(r.band.onset)},
                          {"holds_past_onset", r.band.holds_past_onset},
                          {"checks", r.band.samples.size()},
                          {"failing_checks", failing}};
  doc["det_bounds"] = {{"C1", r.det.C1},
                       {"d1", r.det.d1},
                       {"d2", r.det.d2},
                       {"positive_slopes", r.det.positive_slopes},
                       {"coverage_ok", r.det.coverage_ok},
                       {"samples", r.det_samples},
                       {"outside", r.det_outside}};
  doc["sigma_a"] = abscissa_json(r.sigma_a);
  doc["sigma_c"] = abscissa_json(r.sigma_c);
  doc["frequency_growth"] = abscissa_json(r.growth);
  doc["abscissa_relation"] = {{"sigma_a", jnum(r.relation.sigma_a)},
                              {"sigma_c", jnum(r.relation.sigma_c)},
                              {"h", jnum(r.relation.h)},
                              {"slack", jnum(r.relation.slack)},
                              {"holds", r.relation.holds}};
  json windows = json::array();
  for (const auto& w : r.windows) {
    windows.push_back({{"alpha", w.alpha},
                       {"eps", w.eps},
                       {"eta", w.eta},
                       {"count", w.count},
                       {"bound", jnum(w.bound)},
                       {"onset", jnum(w.onset)},
                       {"verdict", verdict_name(w.verdict)}});
  }
  doc["window_counts"] = windows;
  json diag = json::array();
  for (std::size_t k = 0; k < r.remainders.size(); ++k) {
    const auto& rows = r.remainders[k];
    double over_uk = -std::numeric_limits<double>::infinity();
    double over_u = over_uk;
    for (std::size_t i = rows.size() / 2; i < rows.size(); ++i) {
      if (std::isfinite(rows[i].log_over_uk)) over_uk = std::max(over_uk, rows[i].log_over_uk);
      if (std::isfinite(rows[i].log_over_u)) over_u = std::max(over_u, rows[i].log_over_u);
    }
    diag.push_back({{"k", k + 1}, {"rows", rows.size()}, {"max_log_over_uk", jnum(over_uk)},
                    {"max_log_over_u", jnum(over_u)}});
  }
  doc["remainder_diagnostics"] = diag;
  json tm = {{"k", 1}, {"s", complex_json(r.typical_mean_s)}, {"rows", r.typical_means.size()}};
  if (!r.typical_means.empty()) tm["last"] = complex_json(r.typical_means.back().value);
  doc["typical_means"] = tm;
  doc["eta"] = {{"s", complex_json(r.eta_s)}, {"value", complex_json(r.eta.value)}, {"tail_bound", jnum(r.eta.tail_bound)}};
  return doc.dump(2) + "\n";
}

namespace {

std::string_view left_name(LeftCase c) {
  switch (c) {
    case LeftCase::I: return "(i)";
    case LeftCase::II: return "(ii)";
    case LeftCase::Indeterminate: return "indeterminate";
  }
  return "";
}

std::string_view right_name(RightCase c) {
  switch (c) {
    case RightCase::III: return "(iii)";
    case RightCase::IV: return "(iv)";
    case RightCase::Indeterminate: return "indeterminate";
  }
  return "";
}

json interval_json(const ClusterInterval& iv, const Classification& c) {
  json j = {{"k", iv.k_center + 1},
            {"p", iv.p},
            {"q", iv.q},
            {"lo", iv.lo},
            {"hi", iv.hi},
            {"left_gap", iv.left_edge ? json(nullptr) : json(iv.left_gap)},
            {"right_gap", iv.right_edge ? json(nullptr) : json(iv.right_gap)},
            {"block_sum", iv.block_sum},
            {"width_ok", iv.width_ok},
            {"label", c.label()},
            {"left", left_name(c.left)},
            {"right", right_name(c.right)},
            {"triangle_checked", c.triangle_checked},
            {"triangle_ok", c.triangle_ok}};
  if (c.witness) j["witness"] = {c.witness->lo + 1, c.witness->hi + 1};
  return j;
}

}  // namespace

std::string criteria_json(const CriteriaReport& r, std::string_view hash) {
  json doc;
  doc["config"] = hash;
  doc["params"] = {{"delta", r.params.delta}, {"gamma", r.params.gamma}, {"C", r.params.C}};
  doc["param_checks"] = {{"gap_scan_ok", r.checks.gap_scan_ok},
                         {"cluster_scan_ok", r.checks.cluster_scan_ok},
                         {"flags", r.checks.flags}};
  json zero = json::array();
  for (auto n : r.condition_L.zero_lines) zero.push_back(n + 1);
  json viol = json::array();
  for (auto n : r.condition_L.violations) viol.push_back(n + 1);
  doc["condition_L"] = {{"c1", r.condition_L.c1},
                        {"c2", r.condition_L.c2},
                        {"n0", r.condition_L.n0 + 1},
                        {"candidate_holds", r.condition_L.candidate_holds},
                        {"multi_holds", r.condition_L.multi_holds},
                        {"empirical_c2", r.condition_L.empirical_c2},
                        {"single_lines", r.condition_L.single_lines},
                        {"multi_lines", r.condition_L.multi_lines},
                        {"violations", viol},
                        {"zero_lines", zero},
                        {"refuted", r.condition_L.refuted}};
  json wit = json::array();
  for (const auto& w : r.witnesses) {
    wit.push_back({{"m", w.m + 1}, {"lambda", w.lambda}, {"gap", w.gap}, {"gap_bound", w.gap_bound},
                   {"tail", w.tail}, {"tail_bound", w.tail_bound}});
  }
  doc["gap_tail_witnesses"] = wit;
  doc["witness_growth"] = {{"horizons", r.growth.horizons}, {"counts", r.growth.counts}, {"grows", r.growth.grows}};
  doc["bohr"] = {{"refuted", r.bohr.refuted},
                 {"ell", r.bohr.ell},
                 {"C1", jnum(r.bohr.C1)},
                 {"tight_pair", {r.bohr.tight_index + 1, r.bohr.tight_index + 2}},
                 {"tight_gap", r.bohr.tight_gap}};
  json skipped = json::array();
  for (auto n : r.tail_exponent.skipped) skipped.push_back(n + 1);
  doc["liminf_tail_exponent"] = {{"value", jnum(r.tail_exponent.value)},
                                 {"bounded", r.tail_exponent.bounded},
                                 {"skipped", skipped}};
  json windows = json::array();
  for (const auto& w : r.windows) {
    const auto& c = w.census;
    json ivs = json::array();
    for (std::size_t i = 0; i < c.build.intervals.size(); ++i) ivs.push_back(interval_json(c.build.intervals[i], w.classes[i]));
    windows.push_back({{"b", c.b},
                       {"threshold", c.build.threshold},
                       {"seeds", c.build.seeds},
                       {"eps", c.eps},
                       {"M", c.M},
                       {"bound", c.bound},
                       {"slack", c.slack},
                       {"passes", c.passes},
                       {"past_onset", c.past_onset},
                       {"flags", c.flags},
                       {"intervals", ivs}});
  }
  doc["cluster_windows"] = windows;
  json triples = json::array();
  for (auto m : r.triples.indices) triples.push_back(m + 1);
  doc["triple_separation"] = {{"indices", triples}, {"condition_L", r.triples.condition_L}};
  auto res = [](const Resonance& x) {
    return json{{"i", x.i + 1}, {"j", x.j + 1}, {"p", x.p}, {"q", x.q}, {"ratio", x.ratio}, {"distance", x.distance}};
  };
  json flagged = json::array();
  for (const auto& f : r.rational.flagged) flagged.push_back(res(f));
  doc["rational_independence"] = {{"pairs", r.rational.pairs},
                                  {"flagged", flagged},
                                  {"strongest", r.rational.strongest ? res(*r.rational.strongest) : json(nullptr)}};
  return doc.dump(2) + "\n";
}

std::string intervals_csv(const CriteriaReport& r, std::string_view hash) {
  std::string out = fmt::format("# intervals config={}\n", hash);
  out += "b,k,p,q,lo,hi,left_gap,right_gap,block_sum,left_edge,right_edge,width_ok,label,witness_lo,witness_hi,"
         "triangle_ok\n";
  for (const auto& w : r.windows) {
    for (std::size_t i = 0; i < w.census.build.intervals.size(); ++i) {
      const auto& iv = w.census.build.intervals[i];
      const auto& c = w.classes[i];
      out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", num(w.census.b), iv.k_center + 1, iv.p,
                         iv.q, num(iv.lo), num(iv.hi), iv.left_edge ? "" : num(iv.left_gap),
                         iv.right_edge ? "" : num(iv.right_gap), num(iv.block_sum), int(iv.left_edge),
                         int(iv.right_edge), int(iv.width_ok), c.label(),
                         c.witness ? std::to_string(c.witness->lo + 1) : "",
                         c.witness ? std::to_string(c.witness->hi + 1) : "", int(c.triangle_ok));
    }
  }
  return out;
}

std::string remainder_csv(const AnalysisReport& r, std::string_view hash) {
  std::string out = fmt::format("# remainders config={}\n", hash);
  out += "k,u,value,log_over_uk,log_over_u\n";
  for (std::size_t k = 0; k < r.remainders.size(); ++k) {
    for (const auto& row : r.remainders[k]) {
      out += fmt::format("{},{},{},{},{}\n", k + 1, num(row.u), num(row.value), num(row.log_over_uk), num(row.log_over_u));
    }
  }
  return out;
}

std::string typical_mean_csv(const AnalysisReport& r, std::string_view hash) {
  std::string out = fmt::format("# typical means k=1 s={}{:+}i config={}\n", num(r.typical_mean_s.real()),
                                r.typical_mean_s.imag(), hash);
  out += "u,re,im\n";
  for (const auto& row : r.typical_means) {
    out += fmt::format("{},{},{}\n", num(row.u), num(row.value.real()), num(row.value.imag()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

}  // namespace

AnalysisReport run_analysis(const OrbitDatabase& db, const Spectrum& spec, const RunConfig& config) {
  AnalysisReport r;
  const double coverage = db.coverage();
  const auto primitives = primitive_periods(db);
  r.h = estimate_h(primitives, coverage);

  std::vector<double> rays;
  for (const auto& t : ray_terms(db, coverage)) rays.push_back(t.tau);
  r.band = check_counting_band(rays, r.h.h, config.eps, coverage);

  const auto samples = det_samples(db);
  r.det = fit_det_bounds(samples);
  r.det_samples = samples.size();
  for (const auto& s : samples) r.det_outside += !r.det.contains(s, 1e-12);

  r.sigma_a = estimate_sigma_a(spec);
  r.sigma_c = estimate_sigma_c(spec);
  r.growth = frequency_growth(spec);
  r.relation = check_abscissa_relation(r.sigma_a, r.sigma_c, r.growth);

  const double b0 = r.band.onset;
  for (double alpha = 1.0; alpha + config.window_eps <= coverage; alpha += 1.0) {
    r.windows.push_back(window_count(primitives, coverage, alpha, config.window_eps, config.eta, r.h.h,
                                     std::isfinite(b0) ? b0 : coverage));
  }

  if (spec.size() >= 2) {
    const auto grid = uniform_grid(spec.lambda(0), spec.lambda(spec.size() - 1), 200);
    for (int k = 1; k <= 3; ++k) r.remainders.push_back(remainder_sweep(spec, k, grid));
  }

  if (!spec.empty()) {
    const double sigma = r.sigma_a.value + 1.0;
    r.typical_mean_s = {sigma, 0.0};
    const double lo = spec.lambda(0);
    const auto grid = uniform_grid(lo + (spec.x_max() - lo) / 200.0, spec.x_max(), 200);
    r.typical_means = typical_mean_sweep(spec, 1, r.typical_mean_s, grid);
  }

  TailModel tail{r.h.h, config.eps, r.det.C1, r.det.d1};
  EtaOptions options;
  options.tail = tail;
  options.sigma_a = r.sigma_a.value;
  const double tail_abscissa = tail.h + tail.eps - tail.d1 / 2.0;
  r.eta_s = {std::max(r.sigma_a.value, tail_abscissa) + 1.0, 0.0};
  r.eta = eval_eta(spec, r.eta_s, options);
  return r;
}

CriteriaReport run_criteria(const OrbitDatabase& db, const Spectrum& spec, const AnalysisReport& analysis,
                            const RunConfig& config, unsigned workers) {
  CriteriaReport r;
  r.condition_L = check_condition_L(spec, analysis.det, db.d0);
  const bool condition_L = r.condition_L.candidate_holds && r.condition_L.multi_holds && !r.condition_L.refuted;
  const double h = analysis.h.h;
  r.params.delta = config.delta.value_or(h + 2.5);
  r.params.gamma = config.gamma.value_or(default_gamma(r.condition_L.c2, analysis.sigma_c.value));
  r.params.C = config.C;
  r.checks = check_params(r.params, h);

  r.witnesses = find_gap_tail_witnesses(spec, r.params);
  const double x = spec.x_max();
  const std::vector<double> horizons{x / 2.0, 3.0 * x / 4.0, x};
  r.growth = witness_growth(spec, r.params, horizons);
  r.bohr = check_bohr(spec);
  r.tail_exponent = liminf_tail_exponent(spec);

  std::vector<double> bs = config.b_windows;
  if (bs.empty()) {
    for (double b = std::ceil(x / 2.0); b + 1.0 <= x; b += 1.0) bs.push_back(b);
  }
  const double b0 = analysis.band.onset;
  const auto tails = tail_sums(spec);
  r.windows = parallel_map(bs.size(), workers, [&](std::size_t i) {
    ClusterWindow w;
    w.census = count_cluster_sets(spec, config.cluster_eps, r.params.delta, bs[i],
                                  std::isfinite(b0) ? std::optional<double>(b0) : std::nullopt);
    for (const auto& iv : w.census.build.intervals) {
      w.classes.push_back(classify_interval(spec, tails, iv, r.params.gamma, condition_L));
    }
    return w;
  });

  r.triples = triple_separation_scan(spec, r.params.delta, r.params.C, condition_L);

  // Time-reversed classes and symmetric copies share a length; only distinct
  // lengths are compared.
  std::vector<double> lengths;
  for (double t : primitive_periods(db)) {
    if (t > x) break;
    if (lengths.empty() || t - lengths.back() > spec.group_tol()) lengths.push_back(t);
  }
  if (lengths.size() >= 2) r.rational = rational_independence_test(lengths, config.q_max, config.tol_rational);
  return r;
}

PipelineResult run_pipeline(const RunConfig& config, const PipelineOptions& options) {
  PipelineResult out;
  out.config = config;
  Stage stage = Stage::Config;
  try {
    validate_config(config);
    out.hash = config_hash(config);

    stage = Stage::Geometry;
    out.geometry.emplace(config.disks);
    const Configuration& geometry = *out.geometry;
    out.validation = validate_non_eclipse(geometry);
    if (!out.validation.ok) {
      fail(ErrorKind::InvalidConfiguration,
           fmt::format("non-eclipse condition fails (min clearance {})", out.validation.min_clearance));
    }
    if (options.last == Stage::Geometry) return out;

    stage = Stage::Sweep;
    const auto db_path = config.output_dir / "orbits.tsv";
    bool cached = false;
    if (options.reuse_orbits) {
      if (const auto header = peek_header(db_path)) {
        cached = header->m_max == config.m_max && header->geometry == geometry_hash(geometry.disks()) &&
                 header->solver_tol == config.solver_tol;
      }
    }
    if (cached) {
      out.db = load_orbits(db_path, geometry, config.solver_tol);
      out.orbits_from_cache = true;
    } else {
      SweepOptions sweep;
      sweep.solver.tol = config.solver_tol;
      sweep.workers = options.workers;
      out.db = sweep_orbits(geometry, config.m_max, sweep);
      if (options.write) {
        save_orbits(out.db, geometry, db_path, config.solver_tol);
        out.written.push_back(db_path);
      }
    }
    if (options.last == Stage::Sweep) return out;

    stage = Stage::Spectrum;
    out.x_max = config.x_max.value_or(out.db.coverage());
    const double group_tol = config.group_tol.value_or(default_group_tol(geometry.d0()));
    out.spectrum = build_spectrum(out.db, out.x_max, group_tol);
    auto emit = [&](const std::string& name, const std::string& contents) {
      if (!options.write) return;
      const auto path = config.output_dir / name;
      write_file(path, contents);
      out.written.push_back(path);
    };
    if (config.write_csv) emit("spectrum.csv", spectrum_csv(out.spectrum, out.hash));
    if (config.write_json) emit("spectrum.json", spectrum_json(out.spectrum, out.hash));
    if (options.last == Stage::Spectrum) return out;

    stage = Stage::Analysis;
    out.analysis = run_analysis(out.db, out.spectrum, config);
    if (config.write_json) emit("analysis.json", analysis_json(out.analysis, out.hash));
    if (config.write_csv) {
      emit("remainders.csv", remainder_csv(out.analysis, out.hash));
      emit("typical_means.csv", typical_mean_csv(out.analysis, out.hash));
    }
    if (options.last == Stage::Analysis) return out;

    stage = Stage::Criteria;
    out.criteria = run_criteria(out.db, out.spectrum, out.analysis, config, options.workers);
    if (config.write_json) emit("criteria.json", criteria_json(out.criteria, out.hash));
    if (config.write_csv) emit("intervals.csv", intervals_csv(out.criteria, out.hash));
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(stage, e);
  }
  return out;
}

}  // namespace pinball
