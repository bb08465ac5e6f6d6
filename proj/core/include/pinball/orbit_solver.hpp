#pragma once

#include <span>
#include <vector>

#include "pinball/geometry.hpp"
#include "pinball/symbolic.hpp"

namespace pinball {

/// One oriented periodic ray. `word` is the canonical class; point i lies on
/// the disk named by itinerary[i], which is the rotation the solver was given.
struct PeriodicOrbit {
  Word word;
  Itinerary itinerary;
  std::vector<Vec2> points;
  std::vector<double> angles;
  double tau = 0.0;
  double tau_primitive = 0.0;
  int m = 0;
  int repetition = 1;
  std::vector<double> incidence_cosines;

  // solver diagnostics
  double residual = 0.0;
  int iterations = 0;
};

struct SolverOptions {
  double tol = 1e-12;
  double descent_tol = 1e-4;
  int max_iterations = 200;
};

/// Locates the unique periodic ray with itinerary `w` by minimising the
/// cyclic polygonal length over one boundary angle per reflection.
PeriodicOrbit locate_orbit(const Configuration& config, const Word& w,
                           const SolverOptions& options = {});

/// Same as locate_orbit but for an itinerary that need not be in canonical
/// rotation; point i corresponds to symbols[i]. The `word` field is still
/// the canonical class.
PeriodicOrbit locate_itinerary(const Configuration& config, std::span<const Symbol> symbols,
                               const SolverOptions& options = {});

/// dL/dθ_i for each reflection point, given boundary angles.
std::vector<double> reflection_residual(const Configuration& config, std::span<const double> angles,
                                        std::span<const Symbol> symbols);

/// Same, with the points given directly (they must lie on their disks).
std::vector<double> reflection_residual(const Configuration& config, std::span<const Vec2> points,
                                        std::span<const Symbol> symbols);

/// Cyclic polygonal length.
double orbit_length(std::span<const Vec2> points);

/// Checks the PeriodicOrbit invariants against `config` (boundary membership,
/// reflection residual, period bookkeeping, occlusion, grazing). Throws the
/// matching ErrorKind on the first violation.
void certify_orbit(const Configuration& config, const PeriodicOrbit& orbit, double residual_tol);

inline constexpr double kGrazingThreshold = 1e-8;

}  // namespace pinball
