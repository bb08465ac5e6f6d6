#include "pinball/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <map>

#include "pinball/analysis.hpp"
#include "pinball/compensated.hpp"
#include "pinball/error.hpp"

namespace pinball {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ParamCheck check_params(const CriteriaParams& params, double h) {
  require(params.delta > 0.0 && params.gamma > 0.0 && params.C > 0.0,
          "criteria parameters delta, gamma and C must be positive");
  ParamCheck out;
  out.gap_scan_ok = params.delta > h + 1.0;
  out.cluster_scan_ok = params.delta > h + 2.0;
  out.gamma_ok = params.gamma > 0.0;
  if (!out.gap_scan_ok) out.flags.push_back(fmt::format("delta {} <= h + 1 = {}", params.delta, h + 1.0));
  if (!out.cluster_scan_ok) out.flags.push_back(fmt::format("delta {} <= h + 2 = {}", params.delta, h + 2.0));
  return out;
}

double default_gamma(double c2, double sigma_c) { return std::max(c2 + 2.0, 10.0 * std::abs(sigma_c)); }

// ---------------------------------------------------------------------------

std::vector<GapTailWitness> find_gap_tail_witnesses(const Spectrum& spec, const CriteriaParams& params) {
  require(spec.size() >= 10, "gap/tail scan needs >= 10 lines");
  const auto tails = tail_sums(spec);
  std::vector<GapTailWitness> out;
  for (std::size_t m = 1; m < spec.size(); ++m) {
    GapTailWitness w;
    w.m = m;
    w.lambda = spec.lambda(m);
    w.gap = spec.lambda(m) - spec.lambda(m - 1);
    w.gap_bound = params.C * std::exp(-params.delta * w.lambda);
    w.tail = tails[m];
    w.tail_bound = std::exp(-params.gamma * w.lambda);
    if (w.gap >= w.gap_bound && std::abs(w.tail) >= w.tail_bound) out.push_back(w);
  }
  return out;
}

WitnessGrowth witness_growth(const Spectrum& spec, const CriteriaParams& params,
                             std::span<const double> horizons) {
  require(std::is_sorted(horizons.begin(), horizons.end()), "horizons must be ascending");
  WitnessGrowth out;
  for (double x : horizons) {
    const Spectrum cut = spec.truncated(x);
    out.horizons.push_back(x);
    out.counts.push_back(cut.size() >= 10 ? find_gap_tail_witnesses(cut, params).size() : 0);
  }
  out.grows = out.counts.size() >= 2 && std::is_sorted(out.counts.begin(), out.counts.end()) &&
              out.counts.back() > out.counts.front();
  return out;
}

BohrFit check_bohr(const Spectrum& spec) {
  require(spec.size() >= 10, "Bohr check needs >= 10 lines");
  BohrFit fit;
  const std::size_t gaps = spec.size() - 1;
  double tight = kInf;
  for (std::size_t n = 0; n < gaps; ++n) {
    const double g = spec.lambda(n + 1) - spec.lambda(n);
    if (g < tight) {
      tight = g;
      fit.tight_index = n;
    }
    fit.proxies.push_back(g > 0.0 ? -std::log(g) / spec.lambda(n) : kInf);
  }
  fit.tight_gap = tight;
  if (tight <= spec.group_tol()) {
    fit.refuted = true;
    return fit;
  }
  double ell = 0.0;
  for (std::size_t n = gaps / 2; n < gaps; ++n) ell = std::max(ell, fit.proxies[n]);
  double c1 = kInf;
  for (std::size_t n = 0; n < gaps; ++n) {
    c1 = std::min(c1, (spec.lambda(n + 1) - spec.lambda(n)) * std::exp(ell * spec.lambda(n)));
  }
  fit.ell = ell;
  fit.C1 = c1;
  return fit;
}

TailExponent liminf_tail_exponent(const Spectrum& spec) {
  TailExponent out;
  const auto tails = tail_sums(spec);
  const std::size_t n = spec.size();
  double lowest = kInf;
  for (std::size_t m = 0; m < n; ++m) {
    if (tails[m] == 0.0) {
      out.skipped.push_back(m);
      continue;
    }
    const double proxy = std::log(std::abs(tails[m])) / spec.lambda(m);
    out.indices.push_back(m);
    out.proxies.push_back(proxy);
    if (m >= n / 2) lowest = std::min(lowest, proxy);
  }
  out.bounded = std::isfinite(lowest);
  out.value = out.bounded ? lowest : -kInf;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<ClusterInterval> cluster_intervals(const Spectrum& spec, double threshold, double seed_lo,
                                               double seed_hi) {
  std::vector<ClusterInterval> out;
  const std::size_t n = spec.size();
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
  auto first_seed = std::lower_bound(spec.lines().begin(), spec.lines().end(), seed_lo,
                                     [](const SpectrumLine& l, double x) { return l.lambda < x; });
  for (auto k = static_cast<std::size_t>(first_seed - spec.lines().begin()); k < n && spec.lambda(k) <= seed_hi;
       ++k) {
    std::size_t lo = k;
    while (lo > 0 && spec.lambda(lo) - spec.lambda(lo - 1) < threshold) --lo;
    std::size_t hi = k;
    while (hi + 1 < n && spec.lambda(hi + 1) - spec.lambda(hi) < threshold) ++hi;
    if (!seen.emplace(std::pair{lo, hi}, out.size()).second) continue;

    ClusterInterval iv;
    iv.k_center = k;
    iv.p = k - lo;
    iv.q = hi - k;
    iv.lo = spec.lambda(lo);
    iv.hi = spec.lambda(hi);
    iv.left_edge = lo == 0;
    iv.right_edge = hi + 1 == n;
    iv.left_gap = iv.left_edge ? 0.0 : spec.lambda(lo) - spec.lambda(lo - 1);
    iv.right_gap = iv.right_edge ? 0.0 : spec.lambda(hi + 1) - spec.lambda(hi);
    CompensatedSum block;
    for (std::size_t i = lo; i <= hi; ++i) block += spec.a(i);
    iv.block_sum = block.value();
    out.push_back(iv);
  }
  return out;
}

ClusterBuild build_cluster_intervals(const Spectrum& spec, double delta, double b) {
  require(delta > 0.0, "delta must be positive");
  if (spec.x_max() < b + 1.0) {
    fail(ErrorKind::Coverage, fmt::format("spectrum horizon {} does not cover [{}, {}]", spec.x_max(), b, b + 1.0));
  }
  ClusterBuild out;
  out.b = b;
  out.delta = delta;
  out.threshold = std::exp(-delta * b);
  const double margin = std::exp(-b);
  const double seed_lo = b + margin;
  const double seed_hi = b + 1.0 - margin;
  for (const auto& line : spec.lines()) {
    if (line.lambda >= seed_lo && line.lambda <= seed_hi) ++out.seeds;
  }
  out.intervals = cluster_intervals(spec, out.threshold, seed_lo, seed_hi);
  for (std::size_t i = 0; i < out.intervals.size(); ++i) {
    auto& iv = out.intervals[i];
    iv.width_ok = iv.hi - iv.lo < margin;
    if (!iv.width_ok) out.width_violations.push_back(i);
  }
  return out;
}

ClusterCensus count_cluster_sets(const Spectrum& spec, double eps, double delta, double b,
                                 std::optional<double> b0) {
  const double margin = std::exp(-b);
  require(eps > margin, "eps must exceed e^{-b}");
  ClusterCensus out;
  out.eps = eps;
  out.b = b;
  out.build = build_cluster_intervals(spec, delta, b);
  for (const auto& iv : out.build.intervals) {
    if (iv.right_edge) continue;
    if (iv.right_gap >= out.build.threshold && iv.right_gap < eps) ++out.M;
  }
  out.bound = (1.0 - 2.0 * eps - 2.0 * margin) / (eps + margin);
  out.slack = 1.0 / eps - 2.0 - out.bound;
  out.passes = static_cast<double>(out.M) >= out.bound;
  out.past_onset = b0 && b >= *b0;
  if (!out.passes && out.build.intervals.size() <= 1) {
    out.flags.push_back("a single cluster spans the window: h and delta are inconsistent at this b");
  }
  if (!out.build.width_violations.empty()) {
    out.flags.push_back(fmt::format("{} intervals wider than e^-b", out.build.width_violations.size()));
  }
  return out;
}

std::string Classification::label() const {
  if (left == LeftCase::Indeterminate || right == RightCase::Indeterminate) return "indeterminate";
  const char* l = left == LeftCase::I ? "(i)" : "(ii)";
  const char* r = right == RightCase::III ? "(iii)" : "(iv)";
  return fmt::format("{}-{}", l, r);
}

Classification classify_interval(const Spectrum& spec, std::span<const double> tails, const ClusterInterval& iv,
                                 double gamma, bool condition_L) {
  require(tails.size() == spec.size() + 1, "tail table does not match the spectrum");
  require(iv.last() < spec.size() && iv.k_center >= iv.p, "interval outside the spectrum");
  Classification c;
  const std::size_t lo = iv.first();
  const std::size_t hi = iv.last();
  c.tail_left = tails[lo];
  c.tail_right = tails[hi];
  c.bound_left = std::exp(-gamma * spec.lambda(lo));
  c.bound_right = std::exp(-gamma * spec.lambda(hi));
  const bool left_edge = lo == 0;
  const bool right_edge = hi + 1 >= spec.size();
  if (!left_edge) c.left = std::abs(c.tail_left) >= c.bound_left ? LeftCase::I : LeftCase::II;
  if (!right_edge) c.right = std::abs(c.tail_right) >= c.bound_right ? RightCase::III : RightCase::IV;
  if (left_edge || right_edge) {
    c.left = LeftCase::Indeterminate;
    c.right = RightCase::Indeterminate;
    return c;
  }

  if (c.left == LeftCase::I) {
    c.witness = IndexRange{lo - 1, lo};
  } else if (std::abs(iv.block_sum) >= 2.0 * c.bound_left) {
    c.witness = IndexRange{hi, hi + 1};
  } else if (c.right == RightCase::IV && condition_L) {
    c.witness = IndexRange{hi, hi + 1};
  }

  if (c.left == LeftCase::II) {
    const double next_bound = std::exp(-gamma * spec.lambda(hi + 1));
    if (std::abs(tails[hi + 1]) < next_bound) {
      c.triangle_checked = true;
      c.triangle_ok = std::abs(iv.block_sum) < c.bound_left + next_bound;
    }
  }
  return c;
}

Classification classify_interval(const Spectrum& spec, const ClusterInterval& iv, double gamma, bool condition_L) {
  const auto tails = tail_sums(spec);
  return classify_interval(spec, tails, iv, gamma, condition_L);
}

// ---------------------------------------------------------------------------

ConditionLFit check_condition_L(const Spectrum& spec, double c1, double c2) {
  require(c1 > 0.0, "c1 must be positive");
  ConditionLFit fit;
  fit.c1 = c1;
  fit.c2 = c2;
  fit.multi_holds = true;
  double empirical = -kInf;
  for (std::size_t n = 0; n < spec.size(); ++n) {
    const auto& line = spec.line(n);
    const bool single = line.contributors.size() <= 1;
    (single ? fit.single_lines : fit.multi_lines)++;
    if (line.a == 0.0) {
      fit.zero_lines.push_back(n);
      fit.violations.push_back(n);
      fit.n0 = n + 1;
      if (!single) fit.multi_holds = false;
      continue;
    }
    empirical = std::max(empirical, -std::log(std::abs(line.a) / c1) / line.lambda);
    const bool ok = std::abs(line.a) >= c1 * std::exp(-c2 * line.lambda);
    if (!ok) {
      if (single) {
        fit.violations.push_back(n);
        fit.n0 = n + 1;
      } else {
        fit.multi_holds = false;
      }
    }
  }
  fit.refuted = !fit.zero_lines.empty();
  fit.candidate_holds = fit.violations.empty();
  fit.empirical_c2 = std::isfinite(empirical) ? empirical : 0.0;
  return fit;
}

ConditionLFit check_condition_L(const Spectrum& spec, const DetBoundsFit& det, double d0) {
  return check_condition_L(spec, d0, det.d2 / 2.0);
}

TripleScan triple_separation_scan(const Spectrum& spec, double delta, double C, bool condition_L) {
  require(spec.size() >= 3, "triple scan needs >= 3 lines");
  TripleScan out;
  out.condition_L = condition_L;
  for (std::size_t m = 1; m + 1 < spec.size(); ++m) {
    const double left = spec.lambda(m) - spec.lambda(m - 1);
    const double right = spec.lambda(m + 1) - spec.lambda(m);
    if (left > C * std::exp(-delta * spec.lambda(m)) && right > C * std::exp(-delta * spec.lambda(m + 1))) {
      out.indices.push_back(m);
    }
  }
  return out;
}

Resonance best_convergent(double x, long long q_max) {
  require(x > 0.0 && std::isfinite(x), "ratio must be positive");
  require(q_max >= 1, "q_max must be >= 1");
  Resonance best;
  best.ratio = x;
  long double r = x;
  long long p_prev = 1, q_prev = 0;
  long long p = static_cast<long long>(std::floor(r)), q = 1;
  best.p = p;
  best.q = q;
  best.distance = std::abs(x - static_cast<double>(p));
  for (int it = 0; it < 64; ++it) {
    const long double frac = r - std::floor(r);
    if (frac <= 0.0L) break;
    r = 1.0L / frac;
    if (!std::isfinite(static_cast<double>(r)) || r > 9e15L) break;
    const auto a = static_cast<long long>(std::floor(r));
    const long long p_next = a * p + p_prev;
    const long long q_next = a * q + q_prev;
    if (q_next > q_max || q_next <= 0) break;
    p_prev = p;
    q_prev = q;
    p = p_next;
    q = q_next;
    const double d = std::abs(static_cast<double>(static_cast<long double>(x) -
                                                  static_cast<long double>(p) / static_cast<long double>(q)));
    if (d <= best.distance) {
      best.p = p;
      best.q = q;
      best.distance = d;
    }
  }
  return best;
}

RationalReport rational_independence_test(std::span<const double> lengths, long long q_max, double tol) {
  require(lengths.size() >= 2, "need >= 2 primitive lengths");
  RationalReport out;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    for (std::size_t j = i + 1; j < lengths.size(); ++j) {
      const double big = std::max(lengths[i], lengths[j]);
      const double small = std::min(lengths[i], lengths[j]);
      Resonance r = best_convergent(big / small, q_max);
      r.i = i;
      r.j = j;
      ++out.pairs;
      if (r.distance <= tol) out.flagged.push_back(r);
      if (!out.strongest || r.distance < out.strongest->distance) out.strongest = r;
    }
  }
  return out;
}

}  // namespace pinball
