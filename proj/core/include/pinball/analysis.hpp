#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pinball/linearization.hpp"
#include "pinball/spectrum.hpp"

namespace pinball {

// ---------------------------------------------------------------------------
// Series evaluation

/// Growth model for the part of the series beyond the truncation horizon:
/// N(x) <= e^{(h+eps)x} rays and |det(Id - P)| >= C1 e^{d1 τ}.
struct TailModel {
  double h = 0.0;
  double eps = 0.3;
  double C1 = 1.0;
  double d1 = 0.0;
};

struct EtaOptions {
  std::optional<TailModel> tail;
  std::optional<double> sigma_a;  // abscissa estimate guarding the domain
  double margin = 0.05;
};

struct EtaValue {
  std::complex<double> value;
  double tail_bound = 0.0;  // NaN when no tail model was supplied
};

/// Partial sum Σ a_n e^{-λ_n s} (compensated) plus the bound on the omitted
/// tail. Throws Domain when Re s is not safely right of the abscissa.
EtaValue eval_eta(const Spectrum& spec, std::complex<double> s, const EtaOptions& options = {});

/// Bound on Σ_{τ > x} τ♯ |det(Id-P)|^{-1/2} e^{-σ τ} under `model`; +inf if
/// the tail does not converge at σ.
double eta_tail_bound(const TailModel& model, double sigma, double x);

// ---------------------------------------------------------------------------
// Counting

struct EntropyEstimate {
  double h = 0.0;
  double c = 0.0;          // fitted log N♯(x) = h x - log(h x) + c
  double x_lo = 0.0;
  double x_hi = 0.0;
  double residual = 0.0;   // RMS of the fit in log N♯
  double ci = 0.0;         // 2 standard errors plus the half-range disagreement
  std::size_t samples = 0;
  int iterations = 0;
};

/// Self-consistent fit of log N♯(x) = h x - log(h x) + c on a uniform grid
/// over [x_lo, x_hi]; x_lo defaults to x_hi / 2. Needs >= 50 primitive rays.
EntropyEstimate estimate_h(std::span<const double> primitive_periods, double x_hi,
                           std::optional<double> x_lo = {});
EntropyEstimate estimate_h(const OrbitDatabase& db);

struct BandSample {
  double x = 0.0;
  std::size_t count = 0;
  bool lower_ok = false;
  bool upper_ok = false;
};

struct BandCheck {
  double h = 0.0;
  double eps = 0.0;
  double onset = 0.0;  // +inf when the band fails at the top of the range
  bool holds_past_onset = false;
  std::vector<BandSample> samples;
};

/// Checks e^{(h-ε)x} <= N(x) <= e^{(h+ε)x} for the ray count N at every jump
/// (just before and at each period) and on a grid up to x_hi. The onset is the
/// smallest checked x past which every check passes.
BandCheck check_counting_band(std::span<const double> ray_periods, double h, double eps, double x_hi);

enum class WindowVerdict { Pass, Fail, OutOfRange };

struct WindowCount {
  double alpha = 0.0;
  double eps = 0.0;
  double eta = 0.0;
  std::size_t count = 0;
  double bound = 0.0;
  double onset = 0.0;
  WindowVerdict verdict = WindowVerdict::OutOfRange;
};

/// Primitive rays with α <= τ♯ <= α + ε against ε(1-η)e^{αh} / (3(α+ε)).
/// Windows starting below max(b0, 3/h, 1) are out of the asymptotic range.
WindowCount window_count(std::span<const double> primitive_periods, double coverage, double alpha,
                         double eps, double eta, double h, double b0);

// ---------------------------------------------------------------------------
// Abscissae

struct AbscissaEstimate {
  double value = 0.0;
  double uncertainty = 0.0;
  std::vector<std::size_t> indices;  // spectrum indices behind each proxy
  std::vector<double> proxies;
  std::vector<std::size_t> skipped;  // zero tails
  bool degenerate = false;           // too few lines for the window scheme
  bool valid = true;                 // σ_c: representation requires value < 0
};

/// Growth slope of log Σ_{λ_n <= x} |a_n| over windows of the upper half;
/// when that is not positive the series converges absolutely at 0 and the
/// slope of log Σ_{λ_n >= x} |a_n| is used instead. Reports the max window.
AbscissaEstimate estimate_sigma_a(const Spectrum& spec);

/// max over the upper half of log|Σ_{n>=m} a_n| / λ_m.
AbscissaEstimate estimate_sigma_c(const Spectrum& spec);

/// max over the upper half of log n / λ_n (1-based n).
AbscissaEstimate frequency_growth(const Spectrum& spec);

struct AbscissaRelation {
  double sigma_a = 0.0;
  double sigma_c = 0.0;
  double h = 0.0;
  double slack = 0.0;
  bool holds = false;
};

/// σ_c >= σ_a - h within the combined proxy uncertainty.
AbscissaRelation check_abscissa_relation(const AbscissaEstimate& sigma_a, const AbscissaEstimate& sigma_c,
                                         const AbscissaEstimate& growth);

// ---------------------------------------------------------------------------
// Tails, remainders, typical means

/// Σ_{n >= m} a_n over the truncated spectrum, compensated.
double tail_sum(const Spectrum& spec, std::size_t m);

/// All tails at once; entry N is 0.
std::vector<double> tail_sums(const Spectrum& spec);

struct Remainder {
  double value = 0.0;
  bool truncated = false;  // u >= λ_N: the finite sum is empty
};

/// R^k(u) = Σ_{λ_n > u} a_n (λ_n - u)^k.
Remainder remainder_Rk(const Spectrum& spec, double u, int k);

struct RemainderRow {
  double u = 0.0;
  double value = 0.0;
  double log_over_uk = 0.0;  // log|R^k(u)| / u^k
  double log_over_u = 0.0;   // log|R^k(u)| / u
};

/// Both normalisations of log|R^k(u)| side by side over `grid`.
std::vector<RemainderRow> remainder_sweep(const Spectrum& spec, int k, std::span<const double> grid);

/// C^k(u) / u^k with C^k(u) = Σ_{λ_n < u} (u - λ_n)^k a_n e^{-λ_n s}.
std::complex<double> typical_mean(const Spectrum& spec, double u, int k, std::complex<double> s);

struct TypicalMeanRow {
  double u = 0.0;
  std::complex<double> value;
};

std::vector<TypicalMeanRow> typical_mean_sweep(const Spectrum& spec, int k, std::complex<double> s,
                                               std::span<const double> grid);

}  // namespace pinball
