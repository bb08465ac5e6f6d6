#include "pinball/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "pinball/compensated.hpp"
#include "pinball/error.hpp"

namespace pinball {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double rms = 0.0;
};

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  LineFit fit;
  if (n < 2) return fit;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += r * r;
  }
  fit.rms = std::sqrt(sse / static_cast<double>(n));
  if (n > 2) fit.slope_stderr = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  return fit;
}

std::size_t count_at_most(std::span<const double> sorted, double x) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
}

std::size_t count_below(std::span<const double> sorted, double x) {
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
}

// Fixed point of h -> slope of (log N(x) + log(h x)) against x.
struct CountingFit {
  double h = 0.0;
  double c = 0.0;
  double stderr_h = 0.0;
  double rms = 0.0;
  int iterations = 0;
};

CountingFit fit_counting(std::span<const double> xs, std::span<const double> log_counts) {
  CountingFit out;
  const LineFit start = least_squares(xs, log_counts);
  double h = std::max(start.slope, 1e-6);
  std::vector<double> y(xs.size());
  LineFit fit;
  for (int it = 0; it < 500; ++it) {
    for (std::size_t j = 0; j < xs.size(); ++j) y[j] = log_counts[j] + std::log(h * xs[j]);
    fit = least_squares(xs, y);
    const double next = std::max(fit.slope, 1e-6);
    out.iterations = it + 1;
    const bool done = std::abs(next - h) <= 1e-13 * std::max(1.0, h);
    h = next;
    if (done) break;
  }
  out.h = h;
  out.c = fit.intercept;
  out.stderr_h = fit.slope_stderr;
  double sse = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double r = log_counts[j] - (h * xs[j] - std::log(h * xs[j]) + out.c);
    sse += r * r;
  }
  out.rms = std::sqrt(sse / static_cast<double>(std::max<std::size_t>(xs.size(), 1)));
  return out;
}

// Least-squares slopes over `windows` consecutive chunks of the points.
std::vector<double> window_slopes(std::span<const double> x, std::span<const double> y, std::size_t windows,
                                  std::vector<std::size_t>* starts) {
  std::vector<double> out;
  const std::size_t n = x.size();
  if (n < 3) return out;
  windows = std::max<std::size_t>(1, std::min(windows, n / 3));
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t b = w * n / windows;
    const std::size_t e = (w + 1) * n / windows;
    out.push_back(least_squares(x.subspan(b, e - b), y.subspan(b, e - b)).slope);
    if (starts) starts->push_back(b);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

double eta_tail_bound(const TailModel& model, double sigma, double x) {
  const double rate = model.h + model.eps;
  const double beta = sigma + model.d1 / 2.0 - rate;
  if (!(beta > 0.0)) return kInf;
  // ∫_x^∞ t C1^{-1/2} e^{-(σ + d1/2) t} dN(t) with dN <= rate e^{rate t} dt.
  return rate / std::sqrt(model.C1) * std::exp(-beta * x) * (x / beta + 1.0 / (beta * beta));
}

EtaValue eval_eta(const Spectrum& spec, std::complex<double> s, const EtaOptions& options) {
  if (options.sigma_a && !(s.real() > *options.sigma_a + options.margin)) {
    fail(ErrorKind::Domain, fmt::format("Re s = {} is not right of the abscissa {} + {}", s.real(),
                                        *options.sigma_a, options.margin));
  }
  EtaValue out;
  out.tail_bound = std::numeric_limits<double>::quiet_NaN();
  if (options.tail) {
    const auto& t = *options.tail;
    const double threshold = t.h + t.eps - t.d1 / 2.0;
    if (!(s.real() > threshold + options.margin)) {
      fail(ErrorKind::Domain, fmt::format("Re s = {} is not right of the tail-model abscissa {} + {}",
                                          s.real(), threshold, options.margin));
    }
    out.tail_bound = eta_tail_bound(t, s.real(), spec.x_max());
  }
  CompensatedComplexSum sum;
  for (const auto& line : spec.lines()) sum += line.a * std::exp(-line.lambda * s);
  out.value = sum.value();
  return out;
}

// ---------------------------------------------------------------------------

EntropyEstimate estimate_h(std::span<const double> periods, double x_hi, std::optional<double> x_lo) {
  if (periods.size() < 50) {
    fail(ErrorKind::InsufficientData,
         fmt::format("entropy fit needs >= 50 primitive rays, got {}", periods.size()));
  }
  require(std::is_sorted(periods.begin(), periods.end()), "periods must be sorted");
  double lo = x_lo.value_or(x_hi / 2.0);
  lo = std::max(lo, periods.front());
  require(x_hi > lo, "empty entropy fit range");

  constexpr std::size_t kGrid = 200;
  std::vector<double> xs(kGrid);
  std::vector<double> ys(kGrid);
  for (std::size_t j = 0; j < kGrid; ++j) {
    xs[j] = lo + (x_hi - lo) * static_cast<double>(j) / static_cast<double>(kGrid - 1);
    ys[j] = std::log(static_cast<double>(count_at_most(periods, xs[j])));
  }
  const CountingFit all = fit_counting(xs, ys);
  const std::size_t half = kGrid / 2;
  const CountingFit lower = fit_counting(std::span(xs).first(half), std::span(ys).first(half));
  const CountingFit upper = fit_counting(std::span(xs).subspan(half), std::span(ys).subspan(half));

  EntropyEstimate est;
  est.h = all.h;
  est.c = all.c;
  est.x_lo = lo;
  est.x_hi = x_hi;
  est.residual = all.rms;
  est.ci = 2.0 * all.stderr_h + 0.5 * std::abs(lower.h - upper.h);
  est.samples = kGrid;
  est.iterations = all.iterations;
  return est;
}

EntropyEstimate estimate_h(const OrbitDatabase& db) {
  return estimate_h(primitive_periods(db), db.coverage());
}

BandCheck check_counting_band(std::span<const double> periods, double h, double eps, double x_hi) {
  require(std::is_sorted(periods.begin(), periods.end()), "periods must be sorted");
  BandCheck band;
  band.h = h;
  band.eps = eps;
  auto lower = [&](double x) { return std::exp((h - eps) * x); };
  auto upper = [&](double x) { return std::exp((h + eps) * x); };

  // Lower bound is worst just before a jump, upper bound right at it.
  for (std::size_t i = 0; i < periods.size(); ++i) {
    const double x = periods[i];
    if (x > x_hi) break;
    if (i > 0 && x == periods[i - 1]) continue;
    const std::size_t before = count_below(periods, x);
    const std::size_t at = count_at_most(periods, x);
    band.samples.push_back({x, before, static_cast<double>(before) >= lower(x), true});
    band.samples.push_back({x, at, true, static_cast<double>(at) <= upper(x)});
  }
  const std::size_t top = count_at_most(periods, x_hi);
  band.samples.push_back({x_hi, top, static_cast<double>(top) >= lower(x_hi),
                          static_cast<double>(top) <= upper(x_hi)});

  std::size_t first_good = band.samples.size();
  for (std::size_t i = band.samples.size(); i-- > 0;) {
    if (!(band.samples[i].lower_ok && band.samples[i].upper_ok)) break;
    first_good = i;
  }
  band.holds_past_onset = first_good < band.samples.size();
  band.onset = band.holds_past_onset ? band.samples[first_good].x : kInf;
  return band;
}

WindowCount window_count(std::span<const double> periods, double coverage, double alpha, double eps,
                         double eta, double h, double b0) {
  require(eps > 0.0 && eps < 0.5, "window width must lie in (0, 1/2)");
  require(eta > 0.0 && eta < eps / (12.0 * (1.0 + eps)), "eta must lie in (0, eps / (12 (1 + eps)))");
  require(h > 0.0, "entropy must be positive");
  if (alpha + eps > coverage) {
    fail(ErrorKind::Coverage, fmt::format("window [{}, {}] exceeds coverage {}", alpha, alpha + eps, coverage));
  }
  WindowCount out;
  out.alpha = alpha;
  out.eps = eps;
  out.eta = eta;
  out.count = count_at_most(periods, alpha + eps) - count_below(periods, alpha);
  out.bound = eps * (1.0 - eta) * std::exp(alpha * h) / (3.0 * (alpha + eps));
  out.onset = std::max({b0, 3.0 / h, 1.0});
  if (alpha < out.onset) {
    out.verdict = WindowVerdict::OutOfRange;
  } else {
    out.verdict = static_cast<double>(out.count) > out.bound ? WindowVerdict::Pass : WindowVerdict::Fail;
  }
  return out;
}

// ---------------------------------------------------------------------------

AbscissaEstimate estimate_sigma_a(const Spectrum& spec) {
  const std::size_t n = spec.size();
  const bool all_zero = std::all_of(spec.lines().begin(), spec.lines().end(),
                                    [](const SpectrumLine& l) { return l.a == 0.0; });
  if (n == 0 || all_zero) fail(ErrorKind::Undefined, "abscissa undefined: all coefficients vanish");

  AbscissaEstimate est;
  est.degenerate = n < 20;
  if (n < 4) return est;

  constexpr double kPositiveGrowth = 0.02;
  constexpr std::size_t kWindows = 4;
  const std::size_t first = n / 2;

  std::vector<double> xs, ys;
  std::vector<std::size_t> idx;
  CompensatedSum partial;
  for (std::size_t i = 0; i < n; ++i) {
    partial += std::abs(spec.a(i));
    if (i >= first && partial.value() > 0.0) {
      xs.push_back(spec.lambda(i));
      ys.push_back(std::log(partial.value()));
      idx.push_back(i);
    }
  }
  std::vector<std::size_t> starts;
  auto slopes = window_slopes(xs, ys, kWindows, &starts);
  double growth = -kInf;
  for (double s : slopes) growth = std::max(growth, s);

  if (!slopes.empty() && growth > kPositiveGrowth) {
    est.value = growth;
    est.proxies = slopes;
    for (auto s : starts) est.indices.push_back(idx[s]);
  } else {
    // Absolutely convergent at 0: fit the absolute tails, minus the last
    // eighth where truncation bends them down.
    std::vector<double> tails(n + 1, 0.0);
    CompensatedSum acc;
    for (std::size_t i = n; i-- > 0;) {
      acc += std::abs(spec.a(i));
      tails[i] = acc.value();
    }
    xs.clear();
    ys.clear();
    idx.clear();
    const std::size_t last = std::max(first + 3, n - n / 8);
    for (std::size_t i = first; i < std::min(last, n); ++i) {
      if (tails[i] > 0.0) {
        xs.push_back(spec.lambda(i));
        ys.push_back(std::log(tails[i]));
        idx.push_back(i);
      }
    }
    starts.clear();
    slopes = window_slopes(xs, ys, kWindows, &starts);
    if (slopes.empty()) return est;
    est.value = *std::max_element(slopes.begin(), slopes.end());
    est.proxies = slopes;
    for (auto s : starts) est.indices.push_back(idx[s]);
  }
  const auto [mn, mx] = std::minmax_element(est.proxies.begin(), est.proxies.end());
  est.uncertainty = *mx - *mn;
  return est;
}

AbscissaEstimate estimate_sigma_c(const Spectrum& spec) {
  const std::size_t n = spec.size();
  AbscissaEstimate est;
  est.degenerate = n < 20;
  if (n == 0) fail(ErrorKind::Undefined, "abscissa undefined: empty spectrum");
  const auto tails = tail_sums(spec);
  // Lines past the last nonzero coefficient carry no information.
  std::size_t effective = n;
  while (effective > 0 && spec.a(effective - 1) == 0.0) --effective;
  if (effective == 0) fail(ErrorKind::Undefined, "abscissa undefined: all coefficients vanish");
  const std::size_t first = effective / 2;
  double best = -kInf;
  double best_quarter = -kInf;
  for (std::size_t m = first; m < effective; ++m) {
    if (tails[m] == 0.0) {
      est.skipped.push_back(m);
      continue;
    }
    const double proxy = std::log(std::abs(tails[m])) / spec.lambda(m);
    est.indices.push_back(m);
    est.proxies.push_back(proxy);
    best = std::max(best, proxy);
    if (m >= effective - (effective - first) / 2) best_quarter = std::max(best_quarter, proxy);
  }
  if (est.proxies.empty()) fail(ErrorKind::Undefined, "every tail in the upper half vanishes");
  est.value = best;
  est.uncertainty = std::isfinite(best_quarter) ? best - best_quarter : 0.0;
  est.valid = best < 0.0;
  return est;
}

AbscissaEstimate frequency_growth(const Spectrum& spec) {
  const std::size_t n = spec.size();
  AbscissaEstimate est;
  est.degenerate = n < 20;
  if (n == 0) return est;
  double best = -kInf;
  double worst = kInf;
  for (std::size_t m = n / 2; m < n; ++m) {
    const double proxy = std::log(static_cast<double>(m + 1)) / spec.lambda(m);
    est.indices.push_back(m);
    est.proxies.push_back(proxy);
    best = std::max(best, proxy);
    worst = std::min(worst, proxy);
  }
  est.value = best;
  est.uncertainty = best - worst;
  return est;
}

AbscissaRelation check_abscissa_relation(const AbscissaEstimate& sigma_a, const AbscissaEstimate& sigma_c,
                                         const AbscissaEstimate& growth) {
  AbscissaRelation rel;
  rel.sigma_a = sigma_a.value;
  rel.sigma_c = sigma_c.value;
  rel.h = growth.value;
  rel.slack = sigma_a.uncertainty + sigma_c.uncertainty + growth.uncertainty;
  rel.holds = rel.sigma_c >= rel.sigma_a - rel.h - rel.slack;
  return rel;
}

// ---------------------------------------------------------------------------

std::vector<double> tail_sums(const Spectrum& spec) {
  const std::size_t n = spec.size();
  std::vector<double> out(n + 1, 0.0);
  CompensatedSum acc;
  for (std::size_t i = n; i-- > 0;) {
    acc += spec.a(i);
    out[i] = acc.value();
  }
  return out;
}

double tail_sum(const Spectrum& spec, std::size_t m) {
  require(m <= spec.size(), "tail index out of range");
  CompensatedSum acc;
  for (std::size_t i = spec.size(); i-- > m;) acc += spec.a(i);
  return acc.value();
}

Remainder remainder_Rk(const Spectrum& spec, double u, int k) {
  require(k >= 1, "remainder order must be positive");
  Remainder out;
  out.truncated = spec.empty() || u >= spec.lambda(spec.size() - 1);
  CompensatedSum acc;
  for (std::size_t i = spec.size(); i-- > 0;) {
    const double lambda = spec.lambda(i);
    if (!(lambda > u)) break;
    acc += spec.a(i) * std::pow(lambda - u, k);
  }
  out.value = acc.value();
  return out;
}

std::vector<RemainderRow> remainder_sweep(const Spectrum& spec, int k, std::span<const double> grid) {
  std::vector<RemainderRow> rows;
  rows.reserve(grid.size());
  for (double u : grid) {
    RemainderRow row;
    row.u = u;
    row.value = remainder_Rk(spec, u, k).value;
    const double lg = std::log(std::abs(row.value));
    row.log_over_uk = lg / std::pow(u, k);
    row.log_over_u = lg / u;
    rows.push_back(row);
  }
  return rows;
}

std::complex<double> typical_mean(const Spectrum& spec, double u, int k, std::complex<double> s) {
  require(k >= 0, "typical mean order must be non-negative");
  require(!spec.empty() && u > spec.lambda(0), "typical mean needs u > λ_1");
  CompensatedComplexSum acc;
  for (const auto& line : spec.lines()) {
    if (!(line.lambda < u)) break;
    const double weight = std::pow((u - line.lambda) / u, k);
    acc += weight * line.a * std::exp(-line.lambda * s);
  }
  return acc.value();
}

std::vector<TypicalMeanRow> typical_mean_sweep(const Spectrum& spec, int k, std::complex<double> s,
                                               std::span<const double> grid) {
  std::vector<TypicalMeanRow> rows;
  rows.reserve(grid.size());
  for (double u : grid) rows.push_back({u, typical_mean(spec, u, k, s)});
  return rows;
}

}  // namespace pinball
