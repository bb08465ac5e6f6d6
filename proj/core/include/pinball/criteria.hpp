#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pinball/linearization.hpp"
#include "pinball/spectrum.hpp"

namespace pinball {

struct CriteriaParams {
  double delta = 0.0;  // gap exponent
  double gamma = 0.0;  // tail exponent
  double C = 1.0;      // gap constant
};

struct ParamCheck {
  bool gap_scan_ok = false;      // delta > h + 1
  bool cluster_scan_ok = false;  // delta > h + 2
  bool gamma_ok = false;
  std::vector<std::string> flags;
};

/// Throws Precondition on non-positive parameters; reports the h-dependent
/// constraints as flags.
ParamCheck check_params(const CriteriaParams& params, double h);

/// max(c2 + 2, 10 |σ_c|).
double default_gamma(double c2, double sigma_c);

// ---------------------------------------------------------------------------

struct GapTailWitness {
  std::size_t m = 0;
  double lambda = 0.0;
  double gap = 0.0;         // λ_m - λ_{m-1}
  double gap_bound = 0.0;   // C e^{-δ λ_m}
  double tail = 0.0;        // Σ_{n >= m} a_n
  double tail_bound = 0.0;  // e^{-γ λ_m}
};

/// Every m >= 1 with λ_m - λ_{m-1} >= C e^{-δλ_m} and |T_m| >= e^{-γλ_m}.
std::vector<GapTailWitness> find_gap_tail_witnesses(const Spectrum& spec, const CriteriaParams& params);

struct WitnessGrowth {
  std::vector<double> horizons;
  std::vector<std::size_t> counts;
  bool grows = false;  // counts non-decreasing and the last exceeds the first
};

/// Witness counts on the spectrum truncated at each horizon (ascending).
WitnessGrowth witness_growth(const Spectrum& spec, const CriteriaParams& params,
                             std::span<const double> horizons);

struct BohrFit {
  bool refuted = false;
  double ell = 0.0;
  double C1 = 0.0;
  std::size_t tight_index = 0;  // gap between lines tight_index and tight_index + 1
  double tight_gap = 0.0;
  std::vector<double> proxies;  // -log g_n / λ_n
};

/// Smallest ℓ >= 0 consistent with the upper half of the gaps, and the
/// largest C1 with g_n >= C1 e^{-ℓ λ_n} for every gap. A gap <= group_tol
/// refutes the condition.
BohrFit check_bohr(const Spectrum& spec);

struct TailExponent {
  std::vector<std::size_t> indices;
  std::vector<double> proxies;  // log|T_m| / λ_m
  std::vector<std::size_t> skipped;
  double value = 0.0;           // min over the upper half; -inf if every tail there vanishes
  bool bounded = false;
};

TailExponent liminf_tail_exponent(const Spectrum& spec);

// ---------------------------------------------------------------------------

struct ClusterInterval {
  std::size_t k_center = 0;
  std::size_t p = 0;
  std::size_t q = 0;
  double lo = 0.0;
  double hi = 0.0;
  double left_gap = 0.0;   // 0 when the interval touches the first line
  double right_gap = 0.0;  // 0 when the interval touches the last line
  double block_sum = 0.0;
  bool left_edge = false;
  bool right_edge = false;
  bool width_ok = false;   // hi - lo < e^{-b}

  std::size_t first() const { return k_center - p; }
  std::size_t last() const { return k_center + q; }
};

struct ClusterBuild {
  double b = 0.0;
  double delta = 0.0;
  double threshold = 0.0;  // e^{-δb}
  std::size_t seeds = 0;
  std::vector<ClusterInterval> intervals;
  std::vector<std::size_t> width_violations;  // indices into intervals
};

/// Maximal blocks around every seed in [seed_lo, seed_hi] whose internal
/// gaps are below `threshold`, deduplicated and ordered by position.
std::vector<ClusterInterval> cluster_intervals(const Spectrum& spec, double threshold, double seed_lo,
                                               double seed_hi);

/// Seeds in [b + e^{-b}, b + 1 - e^{-b}] with threshold e^{-δb}. Throws
/// Coverage when the spectrum horizon is below b + 1.
ClusterBuild build_cluster_intervals(const Spectrum& spec, double delta, double b);

struct ClusterCensus {
  double eps = 0.0;
  double b = 0.0;
  std::size_t M = 0;
  double bound = 0.0;  // (1 - 2ε - 2e^{-b}) / (ε + e^{-b})
  double slack = 0.0;  // 1/ε - 2 - bound
  bool passes = false;
  bool past_onset = false;
  std::vector<std::string> flags;
  ClusterBuild build;
};

/// Counts intervals whose right gap lies in [e^{-δb}, ε). Requires ε > e^{-b}.
ClusterCensus count_cluster_sets(const Spectrum& spec, double eps, double delta, double b,
                                 std::optional<double> b0 = {});

enum class LeftCase { I, II, Indeterminate };
enum class RightCase { III, IV, Indeterminate };

struct IndexRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

struct Classification {
  LeftCase left = LeftCase::Indeterminate;
  RightCase right = RightCase::Indeterminate;
  double tail_left = 0.0;    // T_{k-p}
  double tail_right = 0.0;   // T_{k+q}
  double bound_left = 0.0;   // e^{-γ λ_{k-p}}
  double bound_right = 0.0;  // e^{-γ λ_{k+q}}
  std::optional<IndexRange> witness;
  bool triangle_checked = false;
  bool triangle_ok = true;   // (ii) with a small tail at k+q+1 forces a small block

  std::string label() const;
};

/// Labels at k-p ((i) large tail, (ii) small) and at k+q ((iii) large,
/// (iv) small). Edge intervals are indeterminate. When `condition_L` is set,
/// (iv) also yields the right witness interval.
Classification classify_interval(const Spectrum& spec, std::span<const double> tails, const ClusterInterval& iv,
                                 double gamma, bool condition_L = false);
Classification classify_interval(const Spectrum& spec, const ClusterInterval& iv, double gamma,
                                 bool condition_L = false);

// ---------------------------------------------------------------------------

struct ConditionLFit {
  double c1 = 0.0;
  double c2 = 0.0;
  std::size_t n0 = 0;                 // first index past every violation
  bool candidate_holds = false;       // on single-contributor lines
  bool multi_holds = false;           // same candidate on the grouped lines
  double empirical_c2 = 0.0;          // smallest c2 fitting every nonzero line with c1
  std::size_t single_lines = 0;
  std::size_t multi_lines = 0;
  std::vector<std::size_t> violations;
  std::vector<std::size_t> zero_lines;
  bool refuted = false;
};

/// Tests |a_n| >= c1 e^{-c2 λ_n} with c1 = d0 and c2 = d2 / 2.
ConditionLFit check_condition_L(const Spectrum& spec, const DetBoundsFit& det, double d0);
ConditionLFit check_condition_L(const Spectrum& spec, double c1, double c2);

struct TripleScan {
  std::vector<std::size_t> indices;
  bool condition_L = false;
};

/// Interior m with λ_m - λ_{m-1} > C e^{-δλ_m} and λ_{m+1} - λ_m > C e^{-δλ_{m+1}}.
TripleScan triple_separation_scan(const Spectrum& spec, double delta, double C, bool condition_L = false);

struct Resonance {
  std::size_t i = 0;
  std::size_t j = 0;
  long long p = 0;
  long long q = 1;
  double ratio = 0.0;     // larger / smaller
  double distance = 0.0;  // |ratio - p/q|
};

struct RationalReport {
  std::size_t pairs = 0;
  std::vector<Resonance> flagged;
  std::optional<Resonance> strongest;
};

/// Best convergent p/q (q <= q_max) of x by continued fractions.
Resonance best_convergent(double x, long long q_max);

RationalReport rational_independence_test(std::span<const double> lengths, long long q_max, double tol);

}  // namespace pinball
