#include "glt/periodic_grid.hpp"

#include <algorithm>
#include <cmath>

#include "glt/errors.hpp"

namespace glt {

namespace {

int floor_div(int a, int b) {
  const int q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace

PeriodicGrid::PeriodicGrid(int bins_per_axis)
    : bins_(std::max(1, bins_per_axis)), width_(1.0 / bins_) {
  cells_.resize(static_cast<std::size_t>(bins_) * bins_ * bins_);
  // Displacements within the 3x3x3 image block reach at most 1.5 per axis.
  const int reach = static_cast<int>(std::ceil(1.5 * bins_)) + 1;
  for (int a = -reach; a <= reach; ++a) {
    for (int b = -reach; b <= reach; ++b) {
      for (int c = -reach; c <= reach; ++c) {
        double lb2 = 0.0;
        for (int d : {a, b, c}) {
          const double gap = std::max(0, std::abs(d) - 1) * width_;
          lb2 += gap * gap;
        }
        offsets_.push_back({{a, b, c}, std::sqrt(lb2)});
      }
    }
  }
  std::stable_sort(offsets_.begin(), offsets_.end(),
                   [](const Offset& x, const Offset& y) { return x.lower_bound < y.lower_bound; });
}

PeriodicGrid::PeriodicGrid(const Configuration& config, int bins_per_axis)
    : PeriodicGrid(bins_per_axis) {
  for (const auto& g : config.generators()) insert(g);
}

int PeriodicGrid::suggested_bins(std::size_t n) {
  return std::max(1, static_cast<int>(std::lround(std::cbrt(static_cast<double>(n) / 4.0))));
}

std::array<int, 3> PeriodicGrid::bin_of(const Vec3& p) const {
  std::array<int, 3> b{};
  for (int k = 0; k < 3; ++k) {
    b[k] = std::clamp(static_cast<int>(std::floor(p[k] * bins_)), 0, bins_ - 1);
  }
  return b;
}

const std::vector<PeriodicGrid::Entry>& PeriodicGrid::bin(const std::array<int, 3>& b) const {
  return cells_[flat(b)];
}

void PeriodicGrid::insert(const MarkedGenerator& g) {
  cells_[flat(bin_of(g.position))].push_back({g.id, g.position, g.radius});
  radii_.insert(g.radius);
  ++count_;
}

void PeriodicGrid::erase(GeneratorId id, const Vec3& position, double radius) {
  auto& bucket = cells_[flat(bin_of(position))];
  auto it = std::find_if(bucket.begin(), bucket.end(), [&](const Entry& e) { return e.id == id; });
  if (it == bucket.end()) throw UnknownId("generator " + std::to_string(id) + " not in grid");
  *it = bucket.back();
  bucket.pop_back();
  radii_.erase(radii_.find(radius));
  --count_;
}

double PeriodicGrid::gap_squared(const Vec3& p, const std::array<int, 3>& home,
                                 const std::array<int, 3>& delta) const {
  double g2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double lo = (home[k] + delta[k]) * width_;
    const double hi = lo + width_;
    const double g = p[k] < lo ? lo - p[k] : (p[k] > hi ? p[k] - hi : 0.0);
    g2 += g * g;
  }
  return g2;
}

void PeriodicGrid::resolve(const std::array<int, 3>& home, const std::array<int, 3>& delta,
                           std::array<int, 3>& target, Vec3& shift) const {
  for (int k = 0; k < 3; ++k) {
    const int t = home[k] + delta[k];
    const int s = floor_div(t, bins_);
    target[k] = t - s * bins_;
    shift[k] = static_cast<double>(s);
  }
}

std::vector<GeneratorId> PeriodicGrid::ids_near(const Vec3& p, double radius) const {
  std::vector<GeneratorId> ids;
  const auto home = bin_of(p);
  const double r2 = radius * radius;
  std::array<int, 3> target{};
  Vec3 shift;
  for (const auto& off : offsets_) {
    if (off.lower_bound > radius) break;
    if (gap_squared(p, home, off.delta) > r2) continue;
    resolve(home, off.delta, target, shift);
    for (const auto& e : cells_[flat(target)]) {
      if (norm2(e.position + shift - p) <= r2) ids.push_back(e.id);
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace glt
