#include "pinball/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "pinball/compensated.hpp"
#include "pinball/error.hpp"

namespace pinball {

Spectrum Spectrum::from_lines(std::vector<SpectrumLine> lines, double x_max, double group_tol) {
  for (std::size_t n = 0; n < lines.size(); ++n) {
    require(lines[n].lambda > 0.0 && std::isfinite(lines[n].lambda), "frequencies must be positive");
    require(std::isfinite(lines[n].a), "coefficients must be finite");
    if (n > 0) require(lines[n].lambda >= lines[n - 1].lambda, "frequencies must be sorted");
  }
  require(lines.empty() || x_max >= lines.back().lambda, "x_max below the last frequency");
  Spectrum s;
  s.lines_ = std::move(lines);
  s.x_max_ = x_max;
  s.group_tol_ = group_tol;
  return s;
}

Spectrum Spectrum::from_pairs(std::span<const double> lambdas, std::span<const double> coefficients,
                              double x_max, double group_tol) {
  require(lambdas.size() == coefficients.size(), "frequency/coefficient size mismatch");
  std::vector<SpectrumLine> lines(lambdas.size());
  for (std::size_t n = 0; n < lines.size(); ++n) {
    lines[n].lambda = lambdas[n];
    lines[n].a = coefficients[n];
  }
  return from_lines(std::move(lines), x_max, group_tol);
}

std::vector<double> Spectrum::lambdas() const {
  std::vector<double> out(lines_.size());
  for (std::size_t n = 0; n < lines_.size(); ++n) out[n] = lines_[n].lambda;
  return out;
}

std::vector<double> Spectrum::coefficients() const {
  std::vector<double> out(lines_.size());
  for (std::size_t n = 0; n < lines_.size(); ++n) out[n] = lines_[n].a;
  return out;
}

Spectrum Spectrum::truncated(double x) const {
  Spectrum s;
  for (const auto& line : lines_) {
    if (line.lambda <= x) s.lines_.push_back(line);
  }
  s.x_max_ = std::min(x, x_max_);
  s.group_tol_ = group_tol_;
  return s;
}

bool Spectrum::well_separated() const {
  for (std::size_t n = 1; n < lines_.size(); ++n) {
    if (!(lines_[n].lambda - lines_[n - 1].lambda > group_tol_)) return false;
  }
  return true;
}

Spectrum build_spectrum(const OrbitDatabase& db, double x_max, double group_tol) {
  require(group_tol >= 0.0, "group_tol must be non-negative");
  const auto terms = ray_terms(db, x_max);

  Spectrum s;
  s.x_max_ = x_max;
  s.group_tol_ = group_tol;

  std::size_t begin = 0;
  while (begin < terms.size()) {
    std::size_t end = begin + 1;
    while (end < terms.size() && terms[end].tau - terms[end - 1].tau <= group_tol) ++end;

    SpectrumLine line;
    CompensatedSum tau_sum;
    CompensatedSum a_sum;
    for (std::size_t n = begin; n < end; ++n) {
      const auto& t = terms[n];
      tau_sum += t.tau;
      a_sum += t.term();
      line.contributors.push_back({t.primitive, t.repetition, t.tau, t.term()});
    }
    line.lambda = tau_sum.value() / static_cast<double>(end - begin);
    line.a = a_sum.value();
    s.lines_.push_back(std::move(line));

    if (end < terms.size()) {
      const double gap = terms[end].tau - terms[end - 1].tau;
      if (gap <= 10.0 * group_tol) {
        s.warnings_.push_back(fmt::format("ambiguous grouping: gap {:.3e} between {} and {}", gap,
                                          terms[end - 1].primitive.str(), terms[end].primitive.str()));
      }
    }
    begin = end;
  }
  return s;
}

double probe_bump(double t) {
  if (std::abs(t) >= 1.0) return 0.0;
  return std::exp(2.0 - 1.0 / (1.0 - t * t));
}

ProbeResult probe_fd(const OrbitDatabase& db, const ProbeParams& params) {
  require(params.ell >= db.d0, "probe centre must be >= d0");
  require(params.m_scale >= std::max(1.0, 1.0 / db.d0), "probe width parameter must be >= max(1, 1/d0)");
  const double hi = params.ell + 1.0 / params.m_scale;
  if (hi > db.coverage()) {
    fail(ErrorKind::Coverage, fmt::format("probe support reaches {} beyond coverage {}", hi, db.coverage()));
  }
  ProbeResult out;
  CompensatedSum sum;
  for (const auto& t : ray_terms(db, hi)) {
    const double rho = probe_bump(params.m_scale * (t.tau - params.ell));
    if (rho == 0.0) continue;
    sum += t.term() * rho;
    ++out.rays_in_support;
  }
  out.value = sum.value();
  return out;
}

}  // namespace pinball
