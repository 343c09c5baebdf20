#pragma once

#include <array>
#include <set>
#include <vector>

#include "glt/geometry.hpp"

namespace glt {

/// Uniform bin grid over the unit torus. Bin offsets are enumerated far
/// enough to reach every periodic image within the 3x3x3 block around a
/// query point, sorted by a lower bound on their distance.
class PeriodicGrid {
 public:
  struct Entry {
    GeneratorId id;
    Vec3 position;
    double radius;
  };
  struct Offset {
    std::array<int, 3> delta;
    double lower_bound;  // min distance between any two points of home and target bin
  };

  explicit PeriodicGrid(int bins_per_axis = 1);
  PeriodicGrid(const Configuration& config, int bins_per_axis);

  static int suggested_bins(std::size_t n);

  int bins_per_axis() const { return bins_; }
  double bin_width() const { return width_; }
  std::size_t size() const { return count_; }

  void insert(const MarkedGenerator& g);
  void erase(GeneratorId id, const Vec3& position, double radius);

  std::array<int, 3> bin_of(const Vec3& p) const;
  const std::vector<Entry>& bin(const std::array<int, 3>& b) const;
  const std::vector<Offset>& offsets() const { return offsets_; }
  double max_radius() const { return radii_.empty() ? 0.0 : *radii_.rbegin(); }

  /// Exact squared distance from p (inside home bin) to the box of home+delta.
  double gap_squared(const Vec3& p, const std::array<int, 3>& home,
                     const std::array<int, 3>& delta) const;

  /// Target bin of home+delta with the periodic shift it implies.
  void resolve(const std::array<int, 3>& home, const std::array<int, 3>& delta,
               std::array<int, 3>& target, Vec3& shift) const;

  /// Ids of generators with some periodic image within `radius` of p.
  std::vector<GeneratorId> ids_near(const Vec3& p, double radius) const;

 private:
  int flat(const std::array<int, 3>& b) const { return (b[0] * bins_ + b[1]) * bins_ + b[2]; }

  int bins_;
  double width_;
  std::size_t count_ = 0;
  std::vector<std::vector<Entry>> cells_;
  std::vector<Offset> offsets_;
  std::multiset<double> radii_;
};

}  // namespace glt
