#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pinball/analysis.hpp"
#include "pinball/error.hpp"

using namespace pinball;

namespace {

const OrbitDatabase& r6_db() {
  static const OrbitDatabase db = sweep_orbits(Configuration::equilateral(6.0), 8);
  return db;
}

const Spectrum& r6_spec() {
  static const Spectrum spec = build_spectrum(r6_db(), r6_db().coverage(), default_group_tol(r6_db().d0));
  return spec;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Precondition;
}

Spectrum synthetic(std::size_t n, auto&& coefficient) {
  std::vector<double> l(n), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    l[i] = static_cast<double>(i + 1);
    a[i] = coefficient(l[i], i + 1);
  }
  return Spectrum::from_pairs(l, a, static_cast<double>(n));
}

Spectrum random_spectrum(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> lam(1.0, 50.0);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::vector<double> l(n), a(n);
  for (auto& x : l) x = lam(rng);
  std::sort(l.begin(), l.end());
  for (auto& x : a) x = coef(rng);
  return Spectrum::from_pairs(l, a, 50.0);
}

// Periods realising N(x) = round(e^x / x) for x >= 1.
std::vector<double> synthetic_periods(double x_hi) {
  const auto count = [](double x) { return std::exp(x) / x; };
  std::vector<double> out;
  for (std::size_t k = 1;; ++k) {
    const double target = static_cast<double>(k) - 0.5;
    double lo = 1.0, hi = x_hi + 1.0;
    if (count(hi) < target) break;
    if (count(lo) >= target) {
      out.push_back(lo);
      continue;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (count(mid) >= target ? hi : lo) = mid;
    }
    out.push_back(hi);
  }
  return out;
}

}  // namespace

TEST_CASE("eta of a single line") {
  const double A = 0.8164965809277261;
  const std::vector<double> l{8.0}, a{A};
  const auto spec = Spectrum::from_pairs(l, a, 10.0);
  for (const std::complex<double> s : {std::complex<double>(1.0, 0.0), {0.3, 2.5}, {-0.2, -1.0}}) {
    const auto v = eval_eta(spec, s).value;
    const auto expected = A * std::exp(-8.0 * s);
    CHECK(v.real() == doctest::Approx(expected.real()).epsilon(1e-15));
    CHECK(v.imag() == doctest::Approx(expected.imag()).epsilon(1e-15));
  }
}

TEST_CASE("eta is real on the real axis") {
  for (double s : {0.5, 1.0, 2.0}) CHECK(eval_eta(r6_spec(), s).value.imag() == 0.0);
}

TEST_CASE("eta at s = 1 matches a reversed long double sum") {
  const auto& spec = r6_spec();
  const long double ref =
      oracle::reversed_sum(spec.size(), [&](std::size_t i) { return spec.a(i) * std::exp(-(long double)spec.lambda(i)); });
  const double v = eval_eta(spec, 1.0).value.real();
  CHECK(std::abs(v - static_cast<double>(ref)) <= 1e-14 * std::abs(static_cast<double>(ref)));
}

TEST_CASE("eta domain guard") {
  EtaOptions options;
  options.sigma_a = 0.0;
  CHECK(kind_of([&] { eval_eta(r6_spec(), 0.01, options); }) == ErrorKind::Domain);
  CHECK_NOTHROW(eval_eta(r6_spec(), 0.5, options));
  EtaOptions tail;
  tail.tail = TailModel{0.17, 0.3, 1.0, 0.57};
  CHECK(kind_of([&] { eval_eta(r6_spec(), 0.0, tail); }) == ErrorKind::Domain);
}

TEST_CASE("nested truncations differ by less than the tail bound") {
  const auto& db = r6_db();
  const auto est = estimate_h(db);
  const auto fit = fit_det_bounds(det_samples(db));
  EtaOptions options;
  options.tail = TailModel{est.h, 0.3, fit.C1, fit.d1};
  const auto& full = r6_spec();
  for (double s : {0.5, 1.0, 2.0}) {
    for (double x : {16.0, 24.0, 32.0}) {
      const auto trunc = full.truncated(x);
      const auto small = eval_eta(trunc, s, options);
      const auto big = eval_eta(full, s, options);
      CHECK(std::abs(big.value - small.value) < small.tail_bound);
    }
  }
}

TEST_CASE("entropy of a synthetic count") {
  const auto periods = synthetic_periods(12.0);
  const auto est = estimate_h(periods, 12.0);
  CHECK(std::abs(est.h - 1.0) < 0.05);
  CHECK(est.x_lo == doctest::Approx(6.0));
  CHECK(est.residual < 0.1);
}

TEST_CASE("doubling the horizon moves h by less than the interval") {
  const auto periods = synthetic_periods(16.0);
  const auto near = estimate_h(std::span(periods).first(static_cast<std::size_t>(
                                   std::upper_bound(periods.begin(), periods.end(), 8.0) - periods.begin())),
                               8.0);
  const auto far = estimate_h(periods, 16.0);
  CHECK(std::abs(far.h - near.h) < std::max(near.ci, far.ci));
}

TEST_CASE("entropy needs fifty primitive rays") {
  std::vector<double> few(49);
  for (std::size_t i = 0; i < few.size(); ++i) few[i] = 1.0 + 0.1 * static_cast<double>(i);
  CHECK(kind_of([&] { estimate_h(few, 10.0); }) == ErrorKind::InsufficientData);
}

TEST_CASE("side 6 entropy against the bounce-length heuristic") {
  const auto& db = r6_db();
  const auto est = estimate_h(db);
  double per_bounce = 0.0;
  std::size_t n = 0;
  for (const auto& r : db.records) {
    if (!r.primitive()) continue;
    per_bounce += r.orbit.tau / r.orbit.m;
    ++n;
  }
  per_bounce /= static_cast<double>(n);
  const double heuristic = std::log(2.0) / per_bounce;
  CHECK(std::abs(est.h - heuristic) < 0.3);

  std::vector<double> rays;
  for (const auto& t : ray_terms(db, db.coverage())) rays.push_back(t.tau);
  std::sort(rays.begin(), rays.end());
  const auto band = check_counting_band(rays, est.h, 0.3, db.coverage());
  CHECK(band.holds_past_onset);
  CHECK(band.onset < db.coverage());
}

TEST_CASE("band onset is the start of the trailing passing run") {
  std::vector<double> periods;
  for (int i = 0; i < 200; ++i) periods.push_back(1.0 + 0.05 * i);
  const auto band = check_counting_band(periods, 0.5, 0.3, 11.0);
  REQUIRE(!band.samples.empty());
  bool seen_good = false;
  for (const auto& s : band.samples) {
    if (s.x >= band.onset) {
      CHECK(s.lower_ok);
      CHECK(s.upper_ok);
      seen_good = true;
    }
  }
  CHECK(seen_good == band.holds_past_onset);
}

TEST_CASE("window counts") {
  const auto& db = r6_db();
  const auto periods = primitive_periods(db);
  const double h = estimate_h(db).h;

  const auto empty = window_count(periods, db.coverage(), 1.0, 0.2, 0.01, h, 0.0);
  CHECK(empty.count == 0);
  CHECK(empty.verdict == WindowVerdict::OutOfRange);

  const auto two = window_count(periods, db.coverage(), 7.9, 0.2, 0.01, h, 0.0);
  CHECK(two.count == 3);

  std::size_t previous = 0;
  for (double eps = 0.05; eps < 0.5; eps += 0.05) {
    const auto w = window_count(periods, db.coverage(), 20.0, eps, 0.001, h, 0.0);
    CHECK(w.count >= previous);
    previous = w.count;
  }

  CHECK(kind_of([&] { window_count(periods, db.coverage(), 10.0, 0.6, 0.01, h, 0.0); }) ==
        ErrorKind::Precondition);
  CHECK(kind_of([&] { window_count(periods, db.coverage(), 10.0, 0.2, 0.05, h, 0.0); }) ==
        ErrorKind::Precondition);
  CHECK(kind_of([&] { window_count(periods, db.coverage(), db.coverage(), 0.2, 0.01, h, 0.0); }) ==
        ErrorKind::Coverage);
}

TEST_CASE("absolute abscissa of geometric series") {
  for (double sigma : {0.2, 0.5, 1.0}) {
    const auto spec = synthetic(60, [&](double l, std::size_t) { return std::exp(sigma * l); });
    CHECK(std::abs(estimate_sigma_a(spec).value - sigma) < 0.05);
  }
  for (double sigma : {-0.5, -1.0}) {
    const auto spec = synthetic(60, [&](double l, std::size_t n) { return (n % 2 ? 1.0 : -1.0) * std::exp(sigma * l); });
    CHECK(std::abs(estimate_sigma_a(spec).value - sigma) < 0.05);
  }
}

TEST_CASE("absolute abscissa is scale invariant") {
  const auto spec = synthetic(60, [](double l, std::size_t) { return std::exp(0.4 * l); });
  const auto scaled = synthetic(60, [](double l, std::size_t) { return 10.0 * std::exp(0.4 * l); });
  CHECK(estimate_sigma_a(scaled).value == doctest::Approx(estimate_sigma_a(spec).value).epsilon(1e-12));
}

TEST_CASE("absolute abscissa edge cases") {
  const std::vector<double> l{8.0}, a{1.0};
  const auto single = estimate_sigma_a(Spectrum::from_pairs(l, a, 10.0));
  CHECK(single.degenerate);
  CHECK(single.value == 0.0);
  const std::vector<double> l3{1.0, 2.0, 3.0}, z{0.0, 0.0, 0.0};
  CHECK(kind_of([&] { estimate_sigma_a(Spectrum::from_pairs(l3, z, 4.0)); }) == ErrorKind::Undefined);
}

TEST_CASE("conditional abscissa of an alternating geometric series") {
  const auto spec = synthetic(60, [](double l, std::size_t n) { return (n % 2 ? -1.0 : 1.0) * std::exp(-l); });
  const auto est = estimate_sigma_c(spec);
  CHECK(std::abs(est.value + 1.0) < 0.05);
  CHECK(est.valid);
}

TEST_CASE("positive coefficients give equal abscissae") {
  const auto spec = synthetic(60, [](double l, std::size_t) { return std::exp(-0.5 * l); });
  CHECK(std::abs(estimate_sigma_c(spec).value - estimate_sigma_a(spec).value) < 0.05);
}

TEST_CASE("trailing zero lines leave the conditional proxy unchanged") {
  const auto base = synthetic(40, [](double l, std::size_t n) { return (n % 2 ? -1.0 : 1.0) * std::exp(-l); });
  auto l = base.lambdas();
  auto a = base.coefficients();
  for (int i = 0; i < 25; ++i) {
    l.push_back(l.back() + 1.0);
    a.push_back(0.0);
  }
  const auto padded = Spectrum::from_pairs(l, a, l.back());
  const auto p = estimate_sigma_c(padded);
  CHECK(p.value == estimate_sigma_c(base).value);
  CHECK(p.skipped.empty());
}

TEST_CASE("exact zero tails are skipped") {
  const std::vector<double> l{1, 2, 3, 4, 5, 6, 7, 8};
  const std::vector<double> a{1, -1, 1, -1, 0.5, 0.25, -0.5, -0.25};
  const auto est = estimate_sigma_c(Spectrum::from_pairs(l, a, 8.0));
  REQUIRE(est.skipped.size() == 1);
  CHECK(est.skipped[0] == 4);
}

TEST_CASE("abscissa relation on generated spectra") {
  std::mt19937_64 rng(7);
  std::vector<Spectrum> spectra{r6_spec()};
  for (int i = 0; i < 20; ++i) spectra.push_back(random_spectrum(rng, 60));
  spectra.push_back(synthetic(60, [](double l, std::size_t n) { return (n % 2 ? -1.0 : 1.0) * std::exp(-l); }));
  spectra.push_back(synthetic(60, [](double l, std::size_t) { return std::exp(0.3 * l); }));
  for (const auto& spec : spectra) {
    const auto rel = check_abscissa_relation(estimate_sigma_a(spec), estimate_sigma_c(spec), frequency_growth(spec));
    CHECK(rel.holds);
  }
}

TEST_CASE("tail sums") {
  const auto& spec = r6_spec();
  const std::size_t n = spec.size();
  CHECK(tail_sum(spec, n - 1) == spec.a(n - 1));
  const long double all = oracle::reversed_sum(n, [&](std::size_t i) { return (long double)spec.a(i); });
  CHECK(tail_sum(spec, 0) == doctest::Approx(static_cast<double>(all)).epsilon(1e-15));

  std::mt19937_64 rng(11);
  std::vector<Spectrum> spectra{spec};
  for (int i = 0; i < 20; ++i) spectra.push_back(random_spectrum(rng, 80));
  for (const auto& s : spectra) {
    const auto tails = tail_sums(s);
    for (std::size_t m = 0; m + 1 < s.size(); ++m) {
      CHECK(tails[m] == tail_sum(s, m));
      const double scale = std::max({std::abs(tails[m]), std::abs(tails[m + 1]), std::abs(s.a(m))});
      CHECK(std::abs((tails[m] - tails[m + 1]) - s.a(m)) <= 1e-15 * scale);
    }
  }
}

TEST_CASE("remainder of a single line") {
  const std::vector<double> l{5.0}, a{-0.7};
  const auto spec = Spectrum::from_pairs(l, a, 6.0);
  CHECK(remainder_Rk(spec, 2.0, 1).value == doctest::Approx(-0.7 * 3.0));
  CHECK(remainder_Rk(spec, 2.0, 3).value == doctest::Approx(-0.7 * 27.0));
  const auto past = remainder_Rk(spec, 5.0, 1);
  CHECK(past.value == 0.0);
  CHECK(past.truncated);
  CHECK(kind_of([&] { remainder_Rk(spec, 1.0, 0); }) == ErrorKind::Precondition);
}

TEST_CASE("first remainder is continuous with slope jumps at the frequencies") {
  const auto& spec = r6_spec();
  const auto R = [&](double u) { return remainder_Rk(spec, u, 1).value; };
  for (std::size_t m = 0; m + 1 < spec.size(); ++m) {
    const double lm = spec.lambda(m);
    const double below = std::nextafter(lm, 0.0);
    const double above = std::nextafter(lm, 2.0 * lm);
    CHECK(std::abs(R(below) - R(above)) <= 1e-12 * std::max(1.0, std::abs(R(lm))));

    const double left = m == 0 ? lm - 1.0 : 0.5 * (spec.lambda(m - 1) + lm);
    const double right = 0.5 * (lm + spec.lambda(m + 1));
    const double w = 0.25 * std::min(lm - left, right - lm);
    const double slope_left = (R(lm - w) - R(lm - 2 * w)) / w;
    const double slope_right = (R(lm + 2 * w) - R(lm + w)) / w;
    CHECK(std::abs((slope_right - slope_left) - spec.a(m)) <= 1e-6 * std::max(1.0, std::abs(spec.a(m))));
  }
}

TEST_CASE("remainder telescoping identity on random spectra") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    const auto spec = random_spectrum(rng, 60);
    const auto tails = tail_sums(spec);
    for (std::size_t m = 1; m + 1 < spec.size(); ++m) {
      if (!(spec.lambda(m - 1) < spec.lambda(m) && spec.lambda(m) < spec.lambda(m + 1))) continue;
      const double up = spec.lambda(m - 1) + unit(rng) * (spec.lambda(m) - spec.lambda(m - 1));
      const double u = spec.lambda(m) + unit(rng) * (spec.lambda(m + 1) - spec.lambda(m));
      const double Rp = remainder_Rk(spec, up, 1).value;
      const double Ru = remainder_Rk(spec, u, 1).value;
      const double first = spec.a(m) * (spec.lambda(m) - up);
      const double second = (u - up) * tails[m + 1];
      const double scale = std::abs(Rp) + std::abs(Ru) + std::abs(first) + std::abs(second);
      CHECK(std::abs((Rp - Ru) - (first + second)) <= 1e-13 * scale);
    }
  }
}

TEST_CASE("both remainder normalisations are reported") {
  const auto& spec = r6_spec();
  const std::vector<double> grid{9.0, 12.0, 20.0};
  const auto rows = remainder_sweep(spec, 2, grid);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    const double lg = std::log(std::abs(r.value));
    CHECK(r.log_over_uk == doctest::Approx(lg / (r.u * r.u)));
    CHECK(r.log_over_u == doctest::Approx(lg / r.u));
  }
}

TEST_CASE("typical means") {
  const std::vector<double> l{3.0}, a{2.0};
  const auto single = Spectrum::from_pairs(l, a, 4.0);
  const std::complex<double> s(0.4, 1.3);
  const auto limit = 2.0 * std::exp(-3.0 * s);
  const auto far = typical_mean(single, 1e9, 2, s);
  CHECK(std::abs(far - limit) < 1e-7 * std::abs(limit));
  const auto near = typical_mean(single, 6.0, 1, s);
  CHECK(std::abs(near - 0.5 * limit) < 1e-14);

  const auto& spec = r6_spec();
  const double u = 0.5 * (spec.lambda(5) + spec.lambda(6));
  std::complex<double> partial = 0.0;
  for (std::size_t n = 0; n <= 5; ++n) partial += spec.a(n) * std::exp(-spec.lambda(n) * s);
  CHECK(std::abs(typical_mean(spec, u, 0, s) - partial) < 1e-14 * std::abs(partial));

  const auto conv = synthetic(300, [](double l, std::size_t n) { return (n % 2 ? -1.0 : 1.0) * std::exp(-l); });
  const double total = tail_sum(conv, 0);
  CHECK(std::abs(typical_mean(conv, 1e3 * conv.lambda(conv.size() - 1), 1, 0.0).real() - total) < 1e-6);

  CHECK(kind_of([&] { typical_mean(spec, spec.lambda(0), 1, s); }) == ErrorKind::Precondition);
  const std::vector<double> grid{10.0, 20.0, 30.0};
  CHECK(typical_mean_sweep(spec, 1, s, grid).size() == 3);
}
