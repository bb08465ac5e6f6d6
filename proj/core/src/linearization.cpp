#include "pinball/linearization.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include "pinball/error.hpp"

namespace pinball {

double symplectic_defect(const Eigen::Matrix2d& p) {
  const double ad = p(0, 0) * p(1, 1);
  const double bc = p(0, 1) * p(1, 0);
  return std::abs(ad - bc - 1.0) / std::max(std::abs(ad) + std::abs(bc), 1.0);
}

namespace {

// Bounce products accumulate in quad precision where available; the
// determinant is taken before rounding to double (entries grow like |tr P|).
#if defined(__SIZEOF_FLOAT128__)
using Wide = __float128;
#else
using Wide = long double;
#endif

struct Wide2 {
  Wide a = 1, b = 0, c = 0, d = 1;

  static Wide2 from(const Eigen::Matrix2d& m) { return {m(0, 0), m(0, 1), m(1, 0), m(1, 1)}; }
  Wide2 operator*(const Wide2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Eigen::Matrix2d narrow() const {
    Eigen::Matrix2d m;
    m << static_cast<double>(a), static_cast<double>(b), static_cast<double>(c), static_cast<double>(d);
    return m;
  }
};

Monodromy finish(const Eigen::Matrix2d& matrix, double trace, double det) {
  if (!matrix.allFinite()) fail(ErrorKind::Consistency, "monodromy has non-finite entries");
  if (symplectic_defect(matrix) > 1e-8) {
    fail(ErrorKind::Consistency, "monodromy is not unimodular");
  }
  Monodromy out;
  out.matrix = matrix;
  out.trace = trace;
  out.det = det;
  if (!(std::abs(out.trace) > 2.0)) {
    fail(ErrorKind::Consistency, "monodromy is not hyperbolic (|tr| = " + std::to_string(std::abs(out.trace)) + ")");
  }
  out.det_id_minus = std::abs(2.0 - out.trace);
  return out;
}

Monodromy finish(const Wide2& p) {
  return finish(p.narrow(), static_cast<double>(p.a + p.d), static_cast<double>(p.a * p.d - p.b * p.c));
}

}  // namespace

Monodromy make_monodromy(const Eigen::Matrix2d& matrix) {
  const Wide2 p = Wide2::from(matrix);
  return finish(matrix, matrix.trace(), static_cast<double>(p.a * p.d - p.b * p.c));
}

Eigen::Matrix2d bounce_factor(double flight, double curvature, double cos_incidence) {
  Eigen::Matrix2d free_flight;
  free_flight << 1.0, flight, 0.0, 1.0;
  Eigen::Matrix2d reflection;
  reflection << 1.0, 0.0, 2.0 * curvature / cos_incidence, 1.0;
  return -(reflection * free_flight);
}

Monodromy poincare_map(const Configuration& config, const PeriodicOrbit& orbit) {
  const std::size_t m = orbit.points.size();
  require(m >= 2 && orbit.itinerary.size() == m && orbit.incidence_cosines.size() == m,
          "poincare_map needs a certified orbit");
  Wide2 p;
  for (std::size_t n = 1; n <= m; ++n) {
    const std::size_t i = n % m;
    const Wide flight = norm(orbit.points[i] - orbit.points[n - 1]);
    const Wide kappa = config.disk(orbit.itinerary[i]).curvature();
    const Wide reflect = 2 * kappa / Wide(orbit.incidence_cosines[i]);
    // -(reflection * free flight)
    const Wide2 factor{-1, -flight, -reflect, -(reflect * flight + 1)};
    p = factor * p;
  }
  return finish(p);
}

Monodromy repeat(const Monodromy& primitive, int k) {
  require(k >= 1, "repetition count must be positive");
  Wide2 p;
  Wide2 base = Wide2::from(primitive.matrix);
  for (int e = k; e > 0; e >>= 1) {
    if (e & 1) p = p * base;
    if (e > 1) base = base * base;
  }
  return finish(p);
}

namespace {

// The oracle traces rays in extended precision: perturbations grow like the
// stretching factor, so the usable step shrinks with the orbit's instability.
using Real = long double;

struct PointL {
  Real x = 0.0L;
  Real y = 0.0L;
  PointL operator+(PointL o) const { return {x + o.x, y + o.y}; }
  PointL operator-(PointL o) const { return {x - o.x, y - o.y}; }
  PointL operator*(Real s) const { return {x * s, y * s}; }
};

Real dotl(PointL a, PointL b) { return a.x * b.x + a.y * b.y; }
PointL perpl(PointL v) { return {-v.y, v.x}; }
PointL unitl(PointL v) { return v * (1.0L / std::hypot(v.x, v.y)); }
PointL lift(Vec2 v) { return {v.x, v.y}; }

struct BirkhoffState {
  Real s = 0.0L;  // arclength on the section disk
  Real p = 0.0L;  // sin of the signed angle from the outward normal
};

// First positive hit parameter of the ray x + t v on `disk`, or +inf.
Real ray_hit(PointL x, PointL v, const Disk& disk) {
  const PointL rel = x - lift(disk.center);
  const Real b = dotl(rel, v);
  const Real c = dotl(rel, rel) - Real(disk.radius) * Real(disk.radius);
  const Real disc = b * b - c;
  if (disc < 0.0L) return std::numeric_limits<Real>::infinity();
  const Real t1 = -b - std::sqrt(disc);
  if (t1 > 1e-12L) return t1;
  return std::numeric_limits<Real>::infinity();
}

class ReturnMap {
 public:
  ReturnMap(const Configuration& config, const PeriodicOrbit& orbit) : config_(config), orbit_(orbit) {
    const Disk& first = config.disk(orbit.itinerary[0]);
    base_angle_ = orbit.angles[0];
    const PointL n{std::cos(base_angle_), std::sin(base_angle_)};
    const PointL v = unitl(lift(orbit.points[1 % orbit.points.size()]) - lift(first.center) - n * Real(first.radius));
    base_ = {Real(first.radius) * base_angle_, dotl(v, perpl(n))};
  }

  BirkhoffState base() const { return base_; }

  BirkhoffState operator()(BirkhoffState in) const {
    const std::size_t m = orbit_.itinerary.size();
    std::size_t current = orbit_.itinerary[0];
    const Disk& first = config_.disk(current);
    const Real r0 = first.radius;
    Real angle = in.s / r0;
    PointL n{std::cos(angle), std::sin(angle)};
    PointL x = lift(first.center) + n * r0;
    if (std::abs(in.p) >= 1.0L) fail(ErrorKind::OracleFailure, "perturbed ray is tangent");
    PointL v = n * std::sqrt(1.0L - in.p * in.p) + perpl(n) * in.p;

    for (std::size_t bounce = 1; bounce <= m; ++bounce) {
      const std::size_t target = orbit_.itinerary[bounce % m];
      const Real t = ray_hit(x, v, config_.disk(target));
      if (!std::isfinite(t)) fail(ErrorKind::OracleFailure, "perturbed ray misses its itinerary");
      for (std::size_t d = 0; d < config_.size(); ++d) {
        if (d == target || d == current) continue;
        if (ray_hit(x, v, config_.disk(d)) < t) {
          fail(ErrorKind::OracleFailure, "perturbed ray hits a foreign obstacle");
        }
      }
      const Disk& disk = config_.disk(target);
      x = x + v * t;
      n = unitl(x - lift(disk.center));
      v = v - n * (2.0L * dotl(v, n));
      current = target;
    }
    const Real raw = std::atan2(n.y, n.x);
    angle = base_angle_ + std::remainder(raw - base_angle_, 2.0L * std::numbers::pi_v<Real>);
    return {r0 * angle, dotl(v, perpl(n))};
  }

 private:
  const Configuration& config_;
  const PeriodicOrbit& orbit_;
  Real base_angle_ = 0.0L;
  BirkhoffState base_;
};

Eigen::Matrix2d central_difference(const ReturnMap& map, Real h) {
  const BirkhoffState x = map.base();
  Eigen::Matrix2d j;
  for (int col = 0; col < 2; ++col) {
    BirkhoffState plus = x;
    BirkhoffState minus = x;
    (col == 0 ? plus.s : plus.p) += h;
    (col == 0 ? minus.s : minus.p) -= h;
    const BirkhoffState fp = map(plus);
    const BirkhoffState fm = map(minus);
    j(0, col) = static_cast<double>((fp.s - fm.s) / (2.0L * h));
    j(1, col) = static_cast<double>((fp.p - fm.p) / (2.0L * h));
  }
  return j;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

Eigen::Matrix2d fd_jacobian_oracle(const Configuration& config, const PeriodicOrbit& orbit, double step) {
  require(step > 0.0, "oracle step must be positive");
  const ReturnMap map(config, orbit);
  const Eigen::Matrix2d coarse = central_difference(map, step);
  const Eigen::Matrix2d fine = central_difference(map, step / 2.0L);
  return (4.0 * fine - coarse) / 3.0;
}

double OracleComparison::trace_rel_error() const { return rel_error(trace_map, trace_oracle); }
double OracleComparison::det_rel_error() const { return rel_error(det_map, det_oracle); }

OracleComparison compare_with_oracle(const Configuration& config, const PeriodicOrbit& orbit,
                                     const Monodromy& map) {
  std::vector<std::pair<double, double>> traces;  // (step, trace)
  for (double step : {1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10}) {
    try {
      traces.emplace_back(step, fd_jacobian_oracle(config, orbit, step).trace());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::OracleFailure) throw;
    }
  }
  if (traces.empty()) fail(ErrorKind::OracleFailure, "oracle failed at every step for " + orbit.word.str());

  std::size_t best = 0;
  if (traces.size() >= 2) {
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n + 1 < traces.size(); ++n) {
      const double gap = std::abs(traces[n].second - traces[n + 1].second);
      if (gap < best_gap) {
        best_gap = gap;
        best = n;
      }
    }
  }
  OracleComparison out;
  out.step = traces[best].first;
  out.trace_map = map.trace;
  out.trace_oracle = traces[best].second;
  out.det_map = map.det_id_minus;
  // (s, sin φ) are canonical coordinates, so det J = 1 and |det(Id - J)| = |2 - tr J|.
  out.det_oracle = std::abs(2.0 - out.trace_oracle);
  return out;
}

double DetBoundsFit::lower(double tau) const { return C1 * std::exp(d1 * tau); }
double DetBoundsFit::upper(double tau) const { return std::exp(d2 * tau); }

bool DetBoundsFit::contains(const DetSample& s, double rel_tol) const {
  const double y = std::log(s.det_id_minus);
  const double slack = std::log1p(rel_tol) + 1e-12 * std::max(1.0, std::abs(y));
  return y >= std::log(C1) + d1 * s.tau - slack && y <= d2 * s.tau + slack;
}

DetBoundsFit fit_det_bounds(std::span<const DetSample> samples) {
  require(!samples.empty(), "fit_det_bounds needs at least one orbit");
  DetBoundsFit fit;
  std::set<int> lengths;
  fit.d2 = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < samples.size(); ++n) {
    require(samples[n].tau > 0.0 && samples[n].det_id_minus > 0.0, "det sample must be positive");
    lengths.insert(samples[n].word_length);
    const double slope = std::log(samples[n].det_id_minus) / samples[n].tau;
    if (slope > fit.d2) {
      fit.d2 = slope;
      fit.upper_attained_by = n;
    }
  }
  fit.coverage_ok = samples.size() >= 10 && lengths.size() >= 3;

  // Lower convex hull of (τ, log det) by monotone chain.
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : samples) pts.emplace_back(s.tau, std::log(s.det_id_minus));
  std::sort(pts.begin(), pts.end());
  // Rays related by symmetry share τ up to rounding; keep one point per τ so
  // that rounding noise does not become a hull edge.
  std::vector<std::pair<double, double>> merged;
  for (const auto& p : pts) {
    if (!merged.empty() && p.first - merged.back().first <= 1e-9 * std::max(1.0, p.first)) {
      merged.back().second = std::min(merged.back().second, p.second);
    } else {
      merged.push_back(p);
    }
  }
  std::vector<std::pair<double, double>> hull;
  for (const auto& p : merged) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull[hull.size() - 1];
      const double turn = (b.first - a.first) * (p.second - a.second) - (b.second - a.second) * (p.first - a.first);
      if (turn > 0.0) break;
      hull.pop_back();
    }
    hull.push_back(p);
  }
  double d1 = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n + 1 < hull.size(); ++n) {
    const double dx = hull[n + 1].first - hull[n].first;
    if (dx <= 0.0) continue;
    const double slope = (hull[n + 1].second - hull[n].second) / dx;
    if (slope > 0.0) d1 = std::min(d1, slope);
  }
  if (!std::isfinite(d1)) {
    // Degenerate hull: fall back to the tight slope through the origin.
    d1 = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) d1 = std::min(d1, std::log(s.det_id_minus) / s.tau);
  }
  fit.d1 = d1;

  double log_c1 = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const double v = std::log(samples[n].det_id_minus) - d1 * samples[n].tau;
    if (v < log_c1) {
      log_c1 = v;
      fit.lower_attained_by = n;
    }
  }
  fit.C1 = std::exp(log_c1);
  fit.positive_slopes = fit.d1 > 0.0 && fit.d2 > 0.0;
  return fit;
}

}  // namespace pinball
