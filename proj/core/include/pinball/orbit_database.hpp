#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pinball/geometry.hpp"
#include "pinball/linearization.hpp"
#include "pinball/orbit_solver.hpp"

namespace pinball {

struct OrbitRecord {
  PeriodicOrbit orbit;
  Monodromy monodromy;

  bool primitive() const { return orbit.repetition == 1; }
};

/// Every canonical class of length 2..m_max, solved and linearised, in
/// canonical word order. Every ray with τ <= coverage is present
/// (τ >= m·d0).
struct OrbitDatabase {
  int m_max = 0;
  double d0 = 0.0;
  std::vector<OrbitRecord> records;

  double coverage() const { return (m_max + 1) * d0; }
  const OrbitRecord* find(const Word& w) const;
};

struct SweepOptions {
  SolverOptions solver;
  unsigned workers = 1;
};

/// Solves every admissible word up to m_max. Primitive monodromies come from
/// poincare_map; repeated words take the matrix power of their primitive.
OrbitDatabase sweep_orbits(const Configuration& config, int m_max, const SweepOptions& options = {});

/// One oriented periodic ray (a primitive ray or one of its repetitions).
struct RayTerm {
  Word primitive;
  int repetition = 1;
  double tau = 0.0;            // k τ♯
  double tau_primitive = 0.0;  // τ♯
  int m = 0;                   // k m♯
  double det_id_minus = 0.0;   // |det(Id - P^k)|

  int sign() const { return m % 2 == 0 ? 1 : -1; }
  double weight() const;       // τ♯ / |det(Id - P^k)|^{1/2}
  double term() const { return sign() * weight(); }
};

/// All rays with τ <= x_max built from the primitive records. Throws
/// Coverage when x_max exceeds the database coverage. Sorted by (τ, word, k).
std::vector<RayTerm> ray_terms(const OrbitDatabase& db, double x_max);

/// Primitive periods τ♯ of the primitive rays, sorted.
std::vector<double> primitive_periods(const OrbitDatabase& db);

/// Per-record τ and |det(Id - P)| for bound fitting.
std::vector<DetSample> det_samples(const OrbitDatabase& db);

}  // namespace pinball
