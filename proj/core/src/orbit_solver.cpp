#include "pinball/orbit_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pinball/compensated.hpp"
#include "pinball/error.hpp"

namespace pinball {

namespace {

struct Frame {
  Vec2 point;
  Vec2 tangent;   // dp/dθ
  Vec2 second;    // d²p/dθ²
};

Frame frame(const Disk& disk, double angle) {
  const Vec2 dir = polar(angle);
  return {disk.center + disk.radius * dir, disk.radius * perp(dir), -disk.radius * dir};
}

class LengthFunctional {
 public:
  LengthFunctional(const Configuration& config, std::span<const Symbol> symbols)
      : config_(config), symbols_(symbols.begin(), symbols.end()) {
    for (Symbol s : symbols_) {
      if (s >= config.size()) fail(ErrorKind::Precondition, "itinerary symbol exceeds disk count");
    }
  }

  std::size_t size() const { return symbols_.size(); }
  const Disk& disk(std::size_t i) const { return config_.disk(symbols_[i]); }

  std::vector<Vec2> points(std::span<const double> angles) const {
    std::vector<Vec2> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = disk(i).boundary_point(angles[i]);
    return out;
  }

  double length(std::span<const double> angles) const { return orbit_length(points(angles)); }

  Eigen::VectorXd gradient(std::span<const double> angles) const {
    const std::size_t m = size();
    Eigen::VectorXd g(static_cast<Eigen::Index>(m));
    const auto pts = points(angles);
    for (std::size_t i = 0; i < m; ++i) {
      g[static_cast<Eigen::Index>(i)] = coordinate_gradient(angles, pts, i);
    }
    return g;
  }

  double coordinate_gradient(std::span<const double> angles, std::span<const Vec2> pts,
                             std::size_t i) const {
    const std::size_t m = size();
    const Vec2 tangent = disk(i).radius * perp(polar(angles[i]));
    const Vec2 next = unit(pts[i] - pts[(i + 1) % m]);
    const Vec2 prev = unit(pts[i] - pts[(i + m - 1) % m]);
    return dot(tangent, next + prev);
  }

  // Cyclic tridiagonal Hessian, accumulated per segment. For m = 2 both
  // segments couple the same pair.
  Eigen::MatrixXd hessian(std::span<const double> angles) const {
    const std::size_t m = size();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t a = 0; a < m; ++a) {
      const std::size_t b = (a + 1) % m;
      const Frame fa = frame(disk(a), angles[a]);
      const Frame fb = frame(disk(b), angles[b]);
      const Vec2 d = fa.point - fb.point;
      const double len = norm(d);
      const Vec2 e = d * (1.0 / len);
      const double ea = dot(e, fa.tangent);
      const double eb = dot(e, fb.tangent);
      const auto ia = static_cast<Eigen::Index>(a);
      const auto ib = static_cast<Eigen::Index>(b);
      h(ia, ia) += (dot(fa.tangent, fa.tangent) - ea * ea) / len + dot(e, fa.second);
      h(ib, ib) += (dot(fb.tangent, fb.tangent) - eb * eb) / len - dot(e, fb.second);
      const double cross_term = (-dot(fa.tangent, fb.tangent) + ea * eb) / len;
      h(ia, ib) += cross_term;
      h(ib, ia) += cross_term;
    }
    return h;
  }

  // Second derivative of L in θ_i alone.
  double coordinate_curvature(std::span<const double> angles, std::size_t i) const {
    const std::size_t m = size();
    const Frame f = frame(disk(i), angles[i]);
    double h = 0.0;
    for (std::size_t other : {(i + 1) % m, (i + m - 1) % m}) {
      const Vec2 d = f.point - disk(other).boundary_point(angles[other]);
      const double len = norm(d);
      const Vec2 e = d * (1.0 / len);
      const double et = dot(e, f.tangent);
      h += (dot(f.tangent, f.tangent) - et * et) / len + dot(e, f.second);
    }
    return h;
  }

 private:
  const Configuration& config_;
  Itinerary symbols_;
};

std::vector<double> initial_angles(const LengthFunctional& L, std::size_t m) {
  std::vector<double> angles(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2 c = L.disk(i).center;
    const Vec2 to_prev = unit(L.disk((i + m - 1) % m).center - c);
    const Vec2 to_next = unit(L.disk((i + 1) % m).center - c);
    Vec2 aim = to_prev + to_next;
    if (norm(aim) < 1e-12) aim = to_next;
    angles[i] = std::atan2(aim.y, aim.x);
  }
  return angles;
}

double grad_norm(const Eigen::VectorXd& g) { return g.norm(); }

}  // namespace

double orbit_length(std::span<const Vec2> points) {
  const std::size_t m = points.size();
  CompensatedSum total;
  for (std::size_t i = 0; i < m; ++i) total += norm(points[(i + 1) % m] - points[i]);
  return total.value();
}

std::vector<double> reflection_residual(const Configuration& config, std::span<const double> angles,
                                        std::span<const Symbol> symbols) {
  require(angles.size() == symbols.size() && symbols.size() >= 2, "angle/itinerary size mismatch");
  LengthFunctional L(config, symbols);
  const auto g = L.gradient(angles);
  return {g.data(), g.data() + g.size()};
}

std::vector<double> reflection_residual(const Configuration& config, std::span<const Vec2> points,
                                        std::span<const Symbol> symbols) {
  require(points.size() == symbols.size() && symbols.size() >= 2, "point/itinerary size mismatch");
  std::vector<double> angles(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec2 rel = points[i] - config.disk(symbols[i]).center;
    angles[i] = std::atan2(rel.y, rel.x);
  }
  return reflection_residual(config, angles, symbols);
}

void certify_orbit(const Configuration& config, const PeriodicOrbit& orbit, double residual_tol) {
  const std::span<const Symbol> symbols = orbit.itinerary;
  const std::size_t m = orbit.points.size();
  if (m != orbit.word.length() || symbols.size() != m || orbit.angles.size() != m || static_cast<std::size_t>(orbit.m) != m) {
    fail(ErrorKind::Integrity, "orbit " + orbit.word.str() + ": inconsistent sizes");
  }
  for (std::size_t i = 0; i < m; ++i) {
    const Disk& disk = config.disk(symbols[i]);
    if (std::abs(norm(orbit.points[i] - disk.center) - disk.radius) > 1e-12 * disk.radius) {
      fail(ErrorKind::Integrity, "orbit " + orbit.word.str() + ": point off its boundary");
    }
  }
  const auto residual = reflection_residual(config, std::span<const double>(orbit.angles), symbols);
  double rnorm = 0.0;
  for (double v : residual) rnorm += v * v;
  rnorm = std::sqrt(rnorm);
  if (rnorm > residual_tol) {
    fail(ErrorKind::Integrity, "orbit " + orbit.word.str() + ": reflection residual " +
                                   std::to_string(rnorm) + " exceeds tolerance");
  }
  const double tau = orbit_length(orbit.points);
  if (std::abs(tau - orbit.tau) > 1e-12 * tau) {
    fail(ErrorKind::Integrity, "orbit " + orbit.word.str() + ": period does not match its points");
  }
  const int k = primitive_decomposition(orbit.word).repetition;
  if (k != orbit.repetition || std::abs(orbit.tau_primitive * k - orbit.tau) > 1e-12 * tau) {
    fail(ErrorKind::Integrity, "orbit " + orbit.word.str() + ": primitive period bookkeeping");
  }

  for (std::size_t i = 0; i < m; ++i) {
    const Vec2 a = orbit.points[i];
    const Vec2 b = orbit.points[(i + 1) % m];
    for (std::size_t d = 0; d < config.size(); ++d) {
      if (d == symbols[i] || d == symbols[(i + 1) % m]) continue;
      const Disk& disk = config.disk(d);
      if (point_segment_distance(disk.center, a, b) <= disk.radius) {
        fail(ErrorKind::Occlusion, "orbit " + orbit.word.str() + ": segment " + std::to_string(i + 1) +
                                       " blocked by disk " + std::to_string(d + 1));
      }
    }
    const Vec2 normal = polar(orbit.angles[i]);
    const double cos_out = dot(normal, unit(b - a));
    const double cos_in = dot(normal, unit(orbit.points[(i + m - 1) % m] - a));
    if (std::min(cos_out, cos_in) < kGrazingThreshold) {
      fail(ErrorKind::Grazing, "orbit " + orbit.word.str() + ": grazing reflection at point " +
                                   std::to_string(i + 1));
    }
  }
}

PeriodicOrbit locate_itinerary(const Configuration& config, std::span<const Symbol> symbols,
                               const SolverOptions& options) {
  require(is_admissible(symbols), "inadmissible itinerary");
  const std::size_t m = symbols.size();
  LengthFunctional L(config, symbols);
  std::vector<double> angles = initial_angles(L, m);

  int iterations = 0;
  Eigen::VectorXd g = L.gradient(angles);

  // Phase 1: cyclic coordinate descent with a few safeguarded 1D Newton steps
  // per coordinate.
  while (grad_norm(g) >= options.descent_tol && iterations < options.max_iterations) {
    ++iterations;
    for (std::size_t i = 0; i < m; ++i) {
      for (int inner = 0; inner < 3; ++inner) {
        const auto pts = L.points(angles);
        const double gi = L.coordinate_gradient(angles, pts, i);
        const double hi = L.coordinate_curvature(angles, i);
        double step = hi > 0.0 ? -gi / hi : -std::copysign(0.1, gi);
        step = std::clamp(step, -0.5, 0.5);
        angles[i] += step;
        if (std::abs(step) < 1e-15) break;
      }
    }
    g = L.gradient(angles);
  }

  // Phase 2: Newton on the full cyclic Hessian with backtracking.
  double current = L.length(angles);
  while (grad_norm(g) >= options.tol && iterations < options.max_iterations) {
    ++iterations;
    const Eigen::MatrixXd h = L.hessian(angles);
    Eigen::VectorXd delta = h.ldlt().solve(-g);
    if (!delta.allFinite() || g.dot(delta) >= 0.0) delta = -g;
    double scale = 1.0;
    std::vector<double> trial(m);
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i = 0; i < m; ++i) trial[i] = angles[i] + scale * delta[static_cast<Eigen::Index>(i)];
      const double len = L.length(trial);
      const Eigen::VectorXd gt = L.gradient(trial);
      if (len <= current + 1e-13 * current || grad_norm(gt) < grad_norm(g)) {
        angles = trial;
        current = len;
        g = gt;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
  }

  const double residual = grad_norm(g);
  if (!(residual < options.tol)) {
    fail(ErrorKind::SolverFailure, "orbit " + Word(symbols).str() + ": no convergence after " +
                                       std::to_string(iterations) + " iterations, residual " +
                                       std::to_string(residual));
  }

  for (double& a : angles) a = std::remainder(a, 2.0 * std::numbers::pi);

  PeriodicOrbit orbit;
  orbit.word = Word(symbols);
  orbit.itinerary.assign(symbols.begin(), symbols.end());
  orbit.points = L.points(angles);
  orbit.angles = angles;
  orbit.m = static_cast<int>(m);
  orbit.tau = orbit_length(orbit.points);
  orbit.repetition = primitive_decomposition(orbit.word).repetition;
  orbit.tau_primitive = orbit.tau / orbit.repetition;
  orbit.residual = residual;
  orbit.iterations = iterations;
  orbit.incidence_cosines.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    orbit.incidence_cosines[i] = dot(polar(angles[i]), unit(orbit.points[(i + 1) % m] - orbit.points[i]));
  }
  // Recomputing the residual after angle wrapping can move it by an ulp, so
  // certify against the stated tolerance with a little headroom.
  certify_orbit(config, orbit, std::max(options.tol * 4.0, 1e-10 * config.d0()));
  return orbit;
}

PeriodicOrbit locate_orbit(const Configuration& config, const Word& w, const SolverOptions& options) {
  return locate_itinerary(config, w.symbols(), options);
}

}  // namespace pinball
