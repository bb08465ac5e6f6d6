#include <CLI11.hpp>
#include <fmt/format.h>

#include "pinball/parallel.hpp"
#include "pinball/workbench.hpp"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  int m_max = 0;
  bool no_cache = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("config", c.config_path, "run configuration file (defaults to three unit disks at side 6)");
  app->add_option("--set", c.overrides, "override a key, e.g. --set analysis.delta=4")->take_all();
  app->add_option("--out", c.out_dir, "output directory");
  app->add_option("--m-max", c.m_max, "maximal word length");
  app->add_flag("--no-cache", c.no_cache, "ignore a cached orbit database");
}

pinball::RunConfig resolve(const Common& c) {
  pinball::RunConfig cfg;
  if (c.config_path.empty()) {
    cfg.disks = pinball::equilateral_disks(6.0, 1.0);
  } else {
    cfg = pinball::load_config(c.config_path);
  }
  for (const auto& o : c.overrides) pinball::apply_override(cfg, o);
  if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
  if (c.m_max > 0) cfg.m_max = c.m_max;
  return cfg;
}

pinball::PipelineResult run(const Common& c, pinball::Stage last) {
  pinball::PipelineOptions options;
  options.last = last;
  options.reuse_orbits = !c.no_cache;
  options.workers = pinball::default_workers();
  return pinball::run_pipeline(resolve(c), options);
}

void print_written(const pinball::PipelineResult& r) {
  for (const auto& p : r.written) fmt::print("wrote {}\n", p.string());
}

int cmd_validate(const Common& c) {
  const auto cfg = resolve(c);
  pinball::validate_config(cfg);
  const pinball::Configuration geometry(cfg.disks);
  const auto report = pinball::validate_non_eclipse(geometry);
  fmt::print("disks {}  d0 {:.12g}\n", geometry.size(), geometry.d0());
  for (const auto& t : report.triples) {
    fmt::print("  hull({},{}) vs disk {}: clearance {:+.12g} {}\n", t.i + 1, t.j + 1, t.k + 1, t.clearance,
               t.pass ? "ok" : "FAIL");
  }
  fmt::print("non-eclipse: {}\n", report.ok ? "pass" : "fail");
  return report.ok ? 0 : 1;
}

int cmd_sweep(const Common& c) {
  const auto r = run(c, pinball::Stage::Sweep);
  fmt::print("orbits {} (m <= {}, coverage {:.6g}){}\n", r.db.records.size(), r.db.m_max, r.db.coverage(),
             r.orbits_from_cache ? " from cache" : "");
  print_written(r);
  return 0;
}

int cmd_spectrum(const Common& c) {
  const auto r = run(c, pinball::Stage::Spectrum);
  fmt::print("lines {} up to x_max {:.6g}\n", r.spectrum.size(), r.x_max);
  for (const auto& w : r.spectrum.warnings()) fmt::print("warning: {}\n", w);
  print_written(r);
  return 0;
}

int cmd_analyze(const Common& c) {
  const auto r = run(c, pinball::Stage::Analysis);
  const auto& a = r.analysis;
  fmt::print("h      {:.6f} +- {:.3g} (fit on [{:.4g}, {:.4g}])\n", a.h.h, a.h.ci, a.h.x_lo, a.h.x_hi);
  fmt::print("band   onset {:.6g} ({})\n", a.band.onset, a.band.holds_past_onset ? "holds past onset" : "no onset");
  fmt::print("det    C1 {:.6g} d1 {:.6g} d2 {:.6g}, {} of {} samples outside\n", a.det.C1, a.det.d1, a.det.d2,
             a.det_outside, a.det_samples);
  fmt::print("sigma  a {:.6f} c {:.6f}{} growth {:.6f}; relation {}\n", a.sigma_a.value, a.sigma_c.value,
             a.sigma_c.valid ? "" : " (invalid)", a.growth.value, a.relation.holds ? "holds" : "violated");
  print_written(r);
  return 0;
}

int cmd_criteria(const Common& c) {
  const auto r = run(c, pinball::Stage::Criteria);
  const auto& k = r.criteria;
  fmt::print("delta {:.6g} gamma {:.6g} C {:.6g}\n", k.params.delta, k.params.gamma, k.params.C);
  for (const auto& f : k.checks.flags) fmt::print("flag: {}\n", f);
  fmt::print("gap/tail witnesses {}\n", k.witnesses.size());
  fmt::print("bohr {}\n", k.bohr.refuted ? "refuted" : fmt::format("ell {:.6g} C1 {:.6g}", k.bohr.ell, k.bohr.C1));
  fmt::print("condition L {} (c1 {:.6g}, c2 {:.6g})\n", k.condition_L.candidate_holds ? "holds" : "fails",
             k.condition_L.c1, k.condition_L.c2);
  for (const auto& w : k.windows) {
    fmt::print("b {:.6g}: {} intervals, M {} vs bound {:.4g} {}\n", w.census.b, w.census.build.intervals.size(),
               w.census.M, w.census.bound, w.census.passes ? "pass" : "fail");
  }
  fmt::print("triples {}\n", k.triples.indices.size());
  if (k.rational.strongest) {
    const auto& s = *k.rational.strongest;
    fmt::print("strongest near-resonance {}/{} at distance {:.3g}; flagged {}\n", s.p, s.q, s.distance,
               k.rational.flagged.size());
  }
  print_written(r);
  return 0;
}

int cmd_probe(const Common& c, double ell, double m_scale) {
  const auto r = run(c, pinball::Stage::Sweep);
  const auto result = pinball::probe_fd(r.db, {ell, m_scale});
  fmt::print("probe(ell={:.6g}, m={:.6g}) = {:.17g} over {} rays\n", ell, m_scale, result.value, result.rays_in_support);
  return 0;
}

int cmd_report(const Common& c) {
  const auto r = run(c, pinball::Stage::Criteria);
  fmt::print("config {}: {} orbits, {} lines, h {:.6f}, {} witnesses\n", r.hash, r.db.records.size(),
             r.spectrum.size(), r.analysis.h.h, r.criteria.witnesses.size());
  print_written(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic rays, Dirichlet series and non-entirety criteria for planar disk billiards"};
  app.require_subcommand(1);

  Common common;
  double ell = 0.0;
  double m_scale = 1.0;

  auto* validate = app.add_subcommand("validate", "check disjointness and the non-eclipse condition");
  auto* sweep = app.add_subcommand("sweep", "enumerate and solve periodic rays, write the orbit database");
  auto* spectrum = app.add_subcommand("spectrum", "assemble the Dirichlet series");
  auto* analyze = app.add_subcommand("analyze", "entropy, abscissae, tails and window counts");
  auto* criteria = app.add_subcommand("criteria", "run every criteria scanner");
  auto* probe = app.add_subcommand("probe", "pair the ray distribution with a smooth bump");
  auto* report = app.add_subcommand("report", "full pipeline with every report");
  for (auto* sub : {validate, sweep, spectrum, analyze, criteria, probe, report}) add_common(sub, common);
  probe->add_option("--ell", ell, "bump centre")->required();
  probe->add_option("--m", m_scale, "bump width parameter")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(common);
    if (*sweep) return cmd_sweep(common);
    if (*spectrum) return cmd_spectrum(common);
    if (*analyze) return cmd_analyze(common);
    if (*criteria) return cmd_criteria(common);
    if (*probe) return cmd_probe(common, ell, m_scale);
    if (*report) return cmd_report(common);
  } catch (const pinball::PipelineError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const pinball::Error& e) {
    fmt::print(stderr, "error: {}: {}\n", pinball::to_string(e.kind()), e.what());
    return 2;
  }
  return 0;
}
