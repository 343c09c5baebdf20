#include "glt/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "glt/errors.hpp"
#include "glt/local_tessellator.hpp"
#include "glt/rng.hpp"

namespace glt {

double power_distance(const Vec3& y, const MarkedGenerator& g) {
  return norm2(y - g.position) - g.radius * g.radius;
}

Vec3 torus_displacement(const Vec3& a, const Vec3& b) {
  Vec3 d = b - a;
  for (int k = 0; k < 3; ++k) d[k] -= std::floor(d[k] + 0.5);
  return d;
}

Vec3 wrap_to_torus(const Vec3& p) {
  Vec3 w = p;
  for (int k = 0; k < 3; ++k) {
    w[k] -= std::floor(w[k]);
    if (w[k] >= 1.0) w[k] = 0.0;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Configuration

std::size_t Configuration::PositionKeyHash::operator()(const PositionKey& k) const {
  return static_cast<std::size_t>(splitmix64(k.x ^ splitmix64(k.y ^ splitmix64(k.z))));
}

Configuration::PositionKey Configuration::key_of(const Vec3& p) {
  // +0.0 and -0.0 compare equal, so normalise before taking bits.
  auto bits = [](double v) { return std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v); };
  return {bits(p.x), bits(p.y), bits(p.z)};
}

void Configuration::validate(const MarkedGenerator& g) {
  for (int k = 0; k < 3; ++k) {
    const double c = g.position[k];
    if (!(c >= 0.0 && c < 1.0)) {
      throw InvalidParameter("generator " + std::to_string(g.id) +
                             ": position outside the canonical cell [0,1)^3");
    }
  }
  if (!std::isfinite(g.radius) || g.radius < 0.0) {
    throw InvalidParameter("generator " + std::to_string(g.id) + ": radius must be finite and >= 0");
  }
  if (g.id < 0) throw InvalidParameter("generator ids must be nonnegative");
}

Configuration::Configuration(std::vector<MarkedGenerator> generators) {
  generators_.reserve(generators.size());
  index_.reserve(generators.size());
  for (const auto& g : generators) insert(g);
}

Configuration Configuration::from_points(std::span<const Vec3> positions,
                                         std::span<const double> radii) {
  if (positions.size() != radii.size()) {
    throw InvalidParameter("positions and radii differ in length");
  }
  Configuration c;
  for (std::size_t i = 0; i < positions.size(); ++i) c.insert(positions[i], radii[i]);
  return c;
}

const MarkedGenerator& Configuration::at(GeneratorId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw UnknownId("unknown generator id " + std::to_string(id));
  return generators_[it->second];
}

void Configuration::insert(const MarkedGenerator& g) {
  validate(g);
  if (index_.contains(g.id)) throw InvalidParameter("duplicate generator id " + std::to_string(g.id));
  if (!positions_.insert(key_of(g.position)).second) {
    throw DegenerateInput("generator " + std::to_string(g.id) +
                          " coincides in position with an existing generator");
  }
  index_.emplace(g.id, generators_.size());
  generators_.push_back(g);
  next_id_ = std::max(next_id_, g.id + 1);
}

GeneratorId Configuration::insert(const Vec3& position, double radius) {
  const GeneratorId id = next_id_;
  insert(MarkedGenerator{id, position, radius});
  return id;
}

void Configuration::erase(GeneratorId id) {
  auto it = index_.find(id);
  if (it == index_.end()) throw UnknownId("unknown generator id " + std::to_string(id));
  const std::size_t slot = it->second;
  positions_.erase(key_of(generators_[slot].position));
  index_.erase(it);
  if (slot + 1 != generators_.size()) {
    generators_[slot] = generators_.back();
    index_[generators_[slot].id] = slot;
  }
  generators_.pop_back();
}

void Configuration::move(GeneratorId id, const Vec3& position, double radius) {
  auto it = index_.find(id);
  if (it == index_.end()) throw UnknownId("unknown generator id " + std::to_string(id));
  MarkedGenerator moved{id, position, radius};
  validate(moved);
  MarkedGenerator& slot = generators_[it->second];
  const auto old_key = key_of(slot.position);
  const auto new_key = key_of(position);
  if (!(old_key == new_key)) {
    if (positions_.contains(new_key)) {
      throw DegenerateInput("move of generator " + std::to_string(id) +
                            " onto an occupied position");
    }
    positions_.erase(old_key);
    positions_.insert(new_key);
  }
  slot = moved;
}

void Configuration::apply(const ConfigurationChange& change) {
  std::visit(
      [this](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Insert>) {
          insert(c.generator);
        } else if constexpr (std::is_same_v<T, Delete>) {
          erase(c.id);
        } else {
          move(c.id, c.position, c.radius);
        }
      },
      change);
}

std::uint64_t Configuration::fingerprint() const {
  std::uint64_t h = splitmix64(generators_.size());
  for (const auto& g : generators_) {
    const auto k = key_of(g.position);
    std::uint64_t e = splitmix64(static_cast<std::uint64_t>(g.id));
    e = splitmix64(e ^ k.x);
    e = splitmix64(e ^ k.y);
    e = splitmix64(e ^ k.z);
    e = splitmix64(e ^ std::bit_cast<std::uint64_t>(g.radius));
    h += e;  // order independent
  }
  return h;
}

std::vector<MarkedGenerator> Configuration::sorted_by_id() const {
  std::vector<MarkedGenerator> out(generators_.begin(), generators_.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

// ---------------------------------------------------------------------------
// Tessellation

bool CellGeometry::touches_own_image() const {
  return std::any_of(faces.begin(), faces.end(),
                     [this](const CellFace& f) { return f.neighbor == generator_id; });
}

double Tessellation::total_volume() const {
  double v = 0.0;
  for (const auto& [id, c] : cells) v += c.volume;
  return v;
}

const CellGeometry& Tessellation::cell(GeneratorId id) const {
  auto it = cells.find(id);
  if (it == cells.end()) throw UnknownId("no nonempty cell for generator " + std::to_string(id));
  return it->second;
}

Tessellation build_tessellation(const Configuration& config, const GeometryTolerances& tol) {
  if (config.empty()) throw InvalidParameter("cannot tessellate an empty configuration");
  return LocalTessellator(config, tol).tessellation();
}

std::set<GeneratorId> affected_ids(const Tessellation& tess, const Configuration& config,
                                   const ConfigurationChange& change,
                                   const GeometryTolerances& tol) {
  const LocalTessellator engine(config, tess, tol);
  return engine.propose(change).touched_ids();
}

ChangeResult apply_change(const Tessellation& tess, const Configuration& config,
                          const ConfigurationChange& change, const GeometryTolerances& tol) {
  LocalTessellator engine(config, tess, tol);
  const auto proposal = engine.propose(change);
  engine.commit(proposal, EmptyCellPolicy::KeepGenerator);
  return {engine.tessellation(), engine.configuration(), proposal.newly_empty};
}

void write_geometry(std::ostream& out, const Tessellation& tess) {
  const auto old_precision = out.precision(17);
  for (const auto& [id, c] : tess.cells) {
    out << "cell " << id << " volume " << c.volume << " nof " << c.nof << " barycenter "
        << c.barycenter.x << ' ' << c.barycenter.y << ' ' << c.barycenter.z << '\n';
    for (const auto& v : c.vertices) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const auto& f : c.faces) {
      out << 'f';
      for (int i : f.vertices) out << ' ' << i;
      out << " / " << f.neighbor << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace glt
