#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "pinball/geometry.hpp"
#include "pinball/orbit_solver.hpp"

namespace pinball {

struct Monodromy {
  Eigen::Matrix2d matrix = Eigen::Matrix2d::Identity();
  double trace = 2.0;
  double det_id_minus = 0.0;  // |det(Id - P)| = |2 - tr P|
  double det = 1.0;           // det P, taken before rounding the entries
};

/// Builds a Monodromy from a unimodular matrix; throws Consistency when the
/// determinant is off or the map is not hyperbolic.
Monodromy make_monodromy(const Eigen::Matrix2d& matrix);

/// Linearised Poincaré map in transverse Jacobi coordinates: for each bounce a
/// free flight [[1, L], [0, 1]] followed by the dispersing reflection
/// -[[1, 0], [2κ/cos φ, 1]], composed in trajectory order starting just after
/// the reflection at point 0. The leading minus is the orientation flip of
/// the transverse frame under a mirror reflection.
Monodromy poincare_map(const Configuration& config, const PeriodicOrbit& orbit);

/// One bounce factor R·F, exposed for tests.
Eigen::Matrix2d bounce_factor(double flight, double curvature, double cos_incidence);

/// k-fold repetition by matrix power.
Monodromy repeat(const Monodromy& primitive, int k);

/// Relative determinant defect |det P - 1| / (|ad| + |bc|).
double symplectic_defect(const Eigen::Matrix2d& matrix);

/// Central-difference Jacobian of the return map in Birkhoff coordinates
/// (arclength on the first disk, sine of the signed reflection angle),
/// Richardson-extrapolated from steps h and h/2. Throws OracleFailure when a
/// perturbed ray leaves the itinerary.
Eigen::Matrix2d fd_jacobian_oracle(const Configuration& config, const PeriodicOrbit& orbit, double step);

struct OracleComparison {
  double trace_map = 0.0;
  double trace_oracle = 0.0;
  double det_map = 0.0;
  double det_oracle = 0.0;
  double step = 0.0;
  double trace_rel_error() const;
  double det_rel_error() const;
};

/// Runs the oracle over the step sweep 1e-5 .. 1e-10 and keeps the step whose
/// trace agrees best with the next smaller one. Unstable orbits need the
/// smaller steps; steps whose perturbed rays escape are skipped.
OracleComparison compare_with_oracle(const Configuration& config, const PeriodicOrbit& orbit,
                                     const Monodromy& map);

struct DetSample {
  double tau = 0.0;
  double det_id_minus = 0.0;
  int word_length = 0;
};

struct DetBoundsFit {
  double C1 = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  std::size_t upper_attained_by = 0;  // index into the sample list
  std::size_t lower_attained_by = 0;
  bool coverage_ok = false;           // >= 10 samples over >= 3 word lengths
  bool positive_slopes = false;

  double lower(double tau) const;
  double upper(double tau) const;
  bool contains(const DetSample& s, double rel_tol = 0.0) const;
};

/// d2 is the tight upper slope through the origin. d1 is the smallest
/// positive slope among the lower convex hull edges of (τ, log|det|), and C1
/// is the largest constant keeping that line below every sample.
DetBoundsFit fit_det_bounds(std::span<const DetSample> samples);

}  // namespace pinball
