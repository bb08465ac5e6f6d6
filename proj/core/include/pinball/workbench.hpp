#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pinball/analysis.hpp"
#include "pinball/criteria.hpp"
#include "pinball/error.hpp"
#include "pinball/geometry.hpp"
#include "pinball/linearization.hpp"
#include "pinball/orbit_database.hpp"
#include "pinball/spectrum.hpp"

namespace pinball {

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  std::vector<Disk> disks;

  int m_max = 8;
  std::optional<double> x_max;      // defaults to the orbit coverage
  std::optional<double> group_tol;  // defaults to 1e-9 d0
  double solver_tol = 1e-12;

  double eps = 0.3;          // counting band half-width
  double window_eps = 0.25;  // window length for window counts
  double eta = 0.01;
  std::optional<double> delta;
  std::optional<double> gamma;
  double C = 1.0;
  std::vector<double> b_windows;  // empty: every integer b in range
  double cluster_eps = 0.1;
  long long q_max = 1000;
  double tol_rational = 1e-9;

  std::filesystem::path output_dir = "out";
  bool write_csv = true;
  bool write_json = true;
};

/// Line-oriented `[section]` / `key = value` text with `disk cx cy r` lines
/// in [geometry]; `#` starts a comment. Errors carry `origin:line`.
RunConfig parse_config(std::string_view text, std::string_view origin = "config");
RunConfig load_config(const std::filesystem::path& path);

/// Applies one `section.key=value` override.
void apply_override(RunConfig& config, std::string_view assignment);

/// Checks tolerances and ranges; throws InvalidConfiguration.
void validate_config(const RunConfig& config);

/// Canonical text form; parse_config(canonical_text(c)) reproduces c.
std::string canonical_text(const RunConfig& config);

std::uint64_t fnv1a(std::string_view bytes);
std::string config_hash(const RunConfig& config);
std::string geometry_hash(std::span<const Disk> disks);

// ---------------------------------------------------------------------------
// Orbit database persistence

void save_orbits(const OrbitDatabase& db, const Configuration& config, const std::filesystem::path& path,
                 double solver_tol = 1e-12);
void write_orbits(const OrbitDatabase& db, const Configuration& config, std::ostream& out,
                  double solver_tol = 1e-12);

/// Reads and revalidates every record against `config`: reflection residual,
/// length, boundary membership, occlusion and the stored stability data.
/// Malformed rows raise Parse with the line number, failed checks Integrity.
OrbitDatabase load_orbits(const std::filesystem::path& path, const Configuration& config,
                          double solver_tol = 1e-12);
OrbitDatabase read_orbits(std::istream& in, const Configuration& config, double solver_tol = 1e-12,
                          std::string_view origin = "orbits");

// ---------------------------------------------------------------------------
// Pipeline

struct AnalysisReport {
  EntropyEstimate h;
  BandCheck band;
  DetBoundsFit det;
  std::size_t det_samples = 0;
  std::size_t det_outside = 0;
  AbscissaEstimate sigma_a;
  AbscissaEstimate sigma_c;
  AbscissaEstimate growth;
  AbscissaRelation relation;
  std::vector<WindowCount> windows;
  std::vector<std::vector<RemainderRow>> remainders;  // k = 1, 2, 3
  std::vector<TypicalMeanRow> typical_means;          // k = 1
  std::complex<double> typical_mean_s;
  EtaValue eta;
  std::complex<double> eta_s;
};

struct ClusterWindow {
  ClusterCensus census;
  std::vector<Classification> classes;
};

struct CriteriaReport {
  CriteriaParams params;
  ParamCheck checks;
  ConditionLFit condition_L;
  std::vector<GapTailWitness> witnesses;
  WitnessGrowth growth;
  BohrFit bohr;
  TailExponent tail_exponent;
  std::vector<ClusterWindow> windows;
  TripleScan triples;
  RationalReport rational;
};

enum class Stage { Config, Geometry, Sweep, Spectrum, Analysis, Criteria, Output };
std::string_view to_string(Stage stage);

class PipelineError : public Error {
 public:
  PipelineError(Stage stage, const Error& cause);
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

struct PipelineOptions {
  Stage last = Stage::Criteria;
  bool reuse_orbits = true;  // load <output>/orbits.tsv when it matches
  bool write = true;
  unsigned workers = 1;
};

struct PipelineResult {
  RunConfig config;
  std::string hash;
  std::optional<Configuration> geometry;
  ValidationReport validation;
  OrbitDatabase db;
  bool orbits_from_cache = false;
  double x_max = 0.0;
  Spectrum spectrum;
  AnalysisReport analysis;
  CriteriaReport criteria;
  std::vector<std::filesystem::path> written;
};

/// Runs validate, sweep, spectrum, analysis and criteria up to `options.last`
/// and writes their reports. Errors are rethrown as PipelineError tagged
/// with the failing stage; nothing is written when geometry fails.
PipelineResult run_pipeline(const RunConfig& config, const PipelineOptions& options = {});

AnalysisReport run_analysis(const OrbitDatabase& db, const Spectrum& spec, const RunConfig& config);
CriteriaReport run_criteria(const OrbitDatabase& db, const Spectrum& spec, const AnalysisReport& analysis,
                            const RunConfig& config, unsigned workers = 1);

// ---------------------------------------------------------------------------
// Exports

std::string spectrum_csv(const Spectrum& spec, std::string_view hash);
std::string spectrum_json(const Spectrum& spec, std::string_view hash);
Spectrum read_spectrum_csv(std::istream& in, double x_max, double group_tol, std::string_view origin = "spectrum");
std::string analysis_json(const AnalysisReport& report, std::string_view hash);
std::string criteria_json(const CriteriaReport& report, std::string_view hash);
std::string intervals_csv(const CriteriaReport& report, std::string_view hash);
std::string remainder_csv(const AnalysisReport& report, std::string_view hash);
std::string typical_mean_csv(const AnalysisReport& report, std::string_view hash);

void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace pinball
