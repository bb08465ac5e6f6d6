#include "pinball/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <string>

#include "pinball/error.hpp"

namespace pinball {

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double len2 = dot(d, d);
  if (len2 == 0.0) return norm(p - a);
  const double t = std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
  return norm(p - (a + t * d));
}

double disk_distance(const Disk& a, const Disk& b) {
  return norm(a.center - b.center) - a.radius - b.radius;
}

double hull_clearance(const Disk& i, const Disk& j, const Disk& k) {
  const Vec2 d = j.center - i.center;
  const double length = norm(d);
  if (length == 0.0) return norm(k.center - i.center) - std::max(i.radius, j.radius) - k.radius;
  const Vec2 e = d * (1.0 / length);
  const Vec2 rel = k.center - i.center;
  const double along = dot(rel, e);
  const double across = std::abs(cross(e, rel));
  const double dr = j.radius - i.radius;

  // f(t) = |rel - t d| - r_i - t dr - r_k is convex in t. With s = along - t L
  // the stationarity condition is s / hypot(s, across) = -dr / L.
  const double slope = -dr / length;
  double s = 0.0;
  if (std::abs(slope) < 1.0) s = slope * across / std::sqrt(1.0 - slope * slope);
  const double t = std::clamp((along - s) / length, 0.0, 1.0);
  const Vec2 c = i.center + t * d;
  return norm(k.center - c) - (i.radius + t * dr) - k.radius;
}

Configuration::Configuration(std::vector<Disk> disks) : disks_(std::move(disks)) {
  if (disks_.size() < 3) {
    fail(ErrorKind::InvalidConfiguration,
         "need at least 3 disks, got " + std::to_string(disks_.size()));
  }
  for (std::size_t n = 0; n < disks_.size(); ++n) {
    const Disk& disk = disks_[n];
    if (!(disk.radius > 0.0) || !std::isfinite(disk.radius) || !std::isfinite(disk.center.x) ||
        !std::isfinite(disk.center.y)) {
      fail(ErrorKind::InvalidConfiguration, "disk " + std::to_string(n + 1) + " has invalid data");
    }
  }
  d0_ = min_separation(disks_);
  non_eclipse_ok_ = validate_non_eclipse(*this).ok;
}

std::vector<Disk> equilateral_disks(double side, double radius) {
  const double rc = side / std::sqrt(3.0);
  std::vector<Disk> disks;
  for (int n = 0; n < 3; ++n) {
    const double angle = 2.0 * std::numbers::pi * n / 3.0;
    disks.push_back({rc * polar(angle), radius});
  }
  return disks;
}

Configuration Configuration::equilateral(double side, double radius) {
  return Configuration(equilateral_disks(side, radius));
}

double min_separation(std::span<const Disk> disks) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < disks.size(); ++a) {
    for (std::size_t b = a + 1; b < disks.size(); ++b) {
      const double dist = disk_distance(disks[a], disks[b]);
      if (!(dist > 0.0)) {
        fail(ErrorKind::InvalidConfiguration, "disks " + std::to_string(a + 1) + " and " +
                                                  std::to_string(b + 1) + " overlap or touch");
      }
      best = std::min(best, dist);
    }
  }
  return best;
}

ValidationReport validate_non_eclipse(const Configuration& config) {
  ValidationReport report;
  report.threshold = kClearanceTolerance * config.d0();
  report.min_clearance = std::numeric_limits<double>::infinity();
  const auto disks = config.disks();
  const std::size_t r = disks.size();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) {
      for (std::size_t k = 0; k < r; ++k) {
        if (k == i || k == j) continue;
        TripleClearance t{i, j, k, hull_clearance(disks[i], disks[j], disks[k]), false};
        t.pass = t.clearance > report.threshold;
        report.min_clearance = std::min(report.min_clearance, t.clearance);
        report.triples.push_back(t);
      }
    }
  }
  // i == j reduces to disjointness, which the Configuration already enforces.
  report.ok = std::all_of(report.triples.begin(), report.triples.end(),
                          [](const TripleClearance& t) { return t.pass; });
  return report;
}

}  // namespace pinball
