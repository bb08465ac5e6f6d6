#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pinball/orbit_database.hpp"

namespace pinball {

struct Contributor {
  Word word;  // primitive class
  int repetition = 1;
  double tau = 0.0;
  double term = 0.0;
};

struct SpectrumLine {
  double lambda = 0.0;
  double a = 0.0;
  std::vector<Contributor> contributors;
};

/// Frequencies λ_n with coefficients a_n of the Dirichlet series, truncated
/// at x_max. Indices are 0-based throughout the API.
class Spectrum {
 public:
  Spectrum() = default;

  /// Synthetic or reloaded spectra. Requires λ > 0 and non-decreasing order;
  /// separation is not enforced.
  static Spectrum from_lines(std::vector<SpectrumLine> lines, double x_max, double group_tol);
  static Spectrum from_pairs(std::span<const double> lambdas, std::span<const double> coefficients,
                             double x_max, double group_tol = 0.0);

  std::span<const SpectrumLine> lines() const { return lines_; }
  const SpectrumLine& line(std::size_t n) const { return lines_.at(n); }
  std::size_t size() const { return lines_.size(); }
  bool empty() const { return lines_.empty(); }
  double lambda(std::size_t n) const { return lines_[n].lambda; }
  double a(std::size_t n) const { return lines_[n].a; }
  double x_max() const { return x_max_; }
  double group_tol() const { return group_tol_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::vector<double> lambdas() const;
  std::vector<double> coefficients() const;

  /// Lines with λ <= x, with the horizon lowered to x.
  Spectrum truncated(double x) const;

  /// True when consecutive frequencies differ by more than group_tol.
  bool well_separated() const;

 private:
  friend Spectrum build_spectrum(const OrbitDatabase&, double, double);
  std::vector<SpectrumLine> lines_;
  double x_max_ = 0.0;
  double group_tol_ = 0.0;
  std::vector<std::string> warnings_;
};

/// Groups every ray with τ <= x_max into lines: rays whose periods chain
/// within group_tol share a line whose λ is the mean of their periods and
/// whose coefficient is the sum of (-1)^m τ♯ |det(Id - P)|^{-1/2}. Gaps in
/// (group_tol, 10 group_tol] are recorded as ambiguous-grouping warnings.
Spectrum build_spectrum(const OrbitDatabase& db, double x_max, double group_tol);

inline double default_group_tol(double d0) { return 1e-9 * d0; }

/// Smooth even bump supported in [-1, 1] with ρ(t) > 1 for |t| <= 1/2:
/// ρ(t) = e² exp(-1 / (1 - t²)).
double probe_bump(double t);

struct ProbeParams {
  double ell = 0.0;
  double m_scale = 1.0;
};

struct ProbeResult {
  double value = 0.0;
  std::size_t rays_in_support = 0;
};

/// Pairing of the ray distribution with ρ(m_scale (t - ell)). Throws
/// Precondition when ell < d0 or m_scale < max(1, 1/d0), and Coverage when
/// the support is not inside the orbit coverage.
ProbeResult probe_fd(const OrbitDatabase& db, const ProbeParams& params);

}  // namespace pinball
