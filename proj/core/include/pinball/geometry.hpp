#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace pinball {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator-() const { return {-x, -y}; }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline Vec2 unit(Vec2 v) { return v * (1.0 / norm(v)); }
inline Vec2 perp(Vec2 v) { return {-v.y, v.x}; }
inline Vec2 polar(double angle) { return {std::cos(angle), std::sin(angle)}; }

/// Distance from `p` to the closed segment [a, b].
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

struct Disk {
  Vec2 center;
  double radius = 1.0;

  Vec2 boundary_point(double angle) const { return center + radius * polar(angle); }
  double curvature() const { return 1.0 / radius; }
};

/// Boundary distance between two disks; negative when they overlap.
double disk_distance(const Disk& a, const Disk& b);

/// Signed clearance dist(D_k, hull(D_i ∪ D_j)). The hull of two disks is the
/// union of disks centred on [c_i, c_j] with linearly interpolated radius, so
/// the clearance is a convex one-parameter minimisation with a closed form.
double hull_clearance(const Disk& i, const Disk& j, const Disk& k);

struct TripleClearance {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  double clearance = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<TripleClearance> triples;
  double min_clearance = 0.0;
  double threshold = 0.0;
  bool ok = false;
};

/// Centres on a circle of radius side/√3, disk 1 on the positive x axis.
std::vector<Disk> equilateral_disks(double side, double radius = 1.0);

/// A validated obstacle system of r >= 3 pairwise disjoint disks.
class Configuration {
 public:
  /// Throws InvalidConfiguration for r < 3, non-positive radii or
  /// overlapping/touching disks. Non-eclipse failure is recorded, not thrown.
  explicit Configuration(std::vector<Disk> disks);

  /// Three equal disks on an equilateral triangle of side `side`, centred at
  /// the origin with disk 1 on the positive x axis.
  static Configuration equilateral(double side, double radius = 1.0);

  std::span<const Disk> disks() const { return disks_; }
  const Disk& disk(std::size_t index) const { return disks_.at(index); }
  std::size_t size() const { return disks_.size(); }
  double d0() const { return d0_; }
  bool non_eclipse_ok() const { return non_eclipse_ok_; }

 private:
  std::vector<Disk> disks_;
  double d0_ = 0.0;
  bool non_eclipse_ok_ = false;
};

/// Relative clearance threshold: a triple with clearance below this times d0
/// is treated as degenerate.
inline constexpr double kClearanceTolerance = 1e-9;

ValidationReport validate_non_eclipse(const Configuration& config);

double min_separation(std::span<const Disk> disks);
inline double min_separation(const Configuration& config) { return min_separation(config.disks()); }

}  // namespace pinball
