#include "glt/local_tessellator.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "glt/errors.hpp"
#include "glt/polytope.hpp"

namespace glt {

namespace {

constexpr double kCubeReach = 0.8660254037844386;  // sqrt(3)/2

ImageShift to_shift(const Vec3& s) {
  auto r = [](double v) { return static_cast<std::int8_t>(std::floor(v + 0.5)); };
  return {r(s.x), r(s.y), r(s.z)};
}

// Clip by the radical plane between the cell's generator (at the origin, squared
// radius own_r2) and a neighbor image at displacement d. Returns the outcome and
// keeps `reach` current.
ClipOutcome cut(ConvexPolytope& poly, double own_r2, const Vec3& d, double other_radius,
                GeneratorId other, const Vec3& shift, double& reach, const GeometryTolerances& tol) {
  const double dd = norm2(d);
  if (dd == 0.0) return ClipOutcome::Untouched;
  const double dn = std::sqrt(dd);
  const double offset = 0.5 * (dd + own_r2 - other_radius * other_radius) / dn;
  if (offset >= reach + tol.plane) return ClipOutcome::Untouched;
  const auto outcome = poly.clip(d / dn, offset, FaceLabel{other, to_shift(shift)}, tol);
  if (outcome == ClipOutcome::Cut) reach = std::sqrt(poly.reach_squared());
  return outcome;
}

// Clip by all 27 images of `other` around `self`.
ClipOutcome cut_by_images(ConvexPolytope& poly, const MarkedGenerator& self,
                          const MarkedGenerator& other, double& reach,
                          const GeometryTolerances& tol) {
  const Vec3 d0 = torus_displacement(self.position, other.position);
  const Vec3 base = self.position + d0 - other.position;  // integer shift of the minimal image
  const double own_r2 = self.radius * self.radius;
  ClipOutcome result = ClipOutcome::Untouched;
  for (int a = -1; a <= 1; ++a) {
    for (int b = -1; b <= 1; ++b) {
      for (int c = -1; c <= 1; ++c) {
        const Vec3 k{double(a), double(b), double(c)};
        const auto outcome = cut(poly, own_r2, d0 + k, other.radius, other.id, base + k, reach, tol);
        if (outcome == ClipOutcome::Emptied) return outcome;
        if (outcome == ClipOutcome::Cut) result = outcome;
      }
    }
  }
  return result;
}

// Whether some image of `other` has a radical plane within reach of `cell`.
bool plane_reaches(const CellGeometry& cell, const MarkedGenerator& other,
                   const GeometryTolerances& tol) {
  const Vec3 d0 = torus_displacement(cell.generator_position, other.position);
  const double dr2 = cell.radius * cell.radius - other.radius * other.radius;
  for (int a = -1; a <= 1; ++a) {
    for (int b = -1; b <= 1; ++b) {
      for (int c = -1; c <= 1; ++c) {
        const double dd = norm2(d0 + Vec3{double(a), double(b), double(c)});
        if (0.5 * (dd + dr2) < (cell.reach + tol.plane) * std::sqrt(dd)) return true;
      }
    }
  }
  return false;
}

bool has_face_with(const CellGeometry& cell, GeneratorId other) {
  return std::any_of(cell.faces.begin(), cell.faces.end(),
                     [other](const CellFace& f) { return f.neighbor == other; });
}

void drop_faces_with(CellGeometry& cell, GeneratorId other) {
  std::erase_if(cell.faces, [other](const CellFace& f) { return f.neighbor == other; });
  cell.nof = static_cast<int>(std::count_if(cell.faces.begin(), cell.faces.end(), [&](const CellFace& f) {
    return f.neighbor != cell.generator_id;
  }));
}

// Faces of `cell` towards generators for which `partner` yields no matching face.
// Slivers are removed; anything larger means the two cells disagree.
template <class PartnerFn>
void reconcile_cell(CellGeometry& cell, const PartnerFn& partner, const GeometryTolerances& tol) {
  std::vector<GeneratorId> dangling;
  for (const auto& f : cell.faces) {
    if (f.neighbor == cell.generator_id) continue;
    const CellGeometry* other = partner(f.neighbor);
    if (other != nullptr && has_face_with(*other, cell.generator_id)) continue;
    if (f.area >= tol.asymmetric_face_area) {
      throw GeometryFailure("cell " + std::to_string(cell.generator_id) + " has a face of area " +
                            std::to_string(f.area) + " towards " + std::to_string(f.neighbor) +
                            " that is missing on the other side");
    }
    dangling.push_back(f.neighbor);
  }
  for (GeneratorId id : dangling) drop_faces_with(cell, id);
}

std::vector<GeneratorId> distinct_neighbors(const CellGeometry& cell) {
  std::vector<GeneratorId> ids;
  for (const auto& f : cell.faces) {
    if (f.neighbor != cell.generator_id) ids.push_back(f.neighbor);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

NeighborPair ordered(GeneratorId a, GeneratorId b) { return a < b ? NeighborPair{a, b} : NeighborPair{b, a}; }

}  // namespace

std::optional<CellGeometry> compute_cell(const MarkedGenerator& g, const PeriodicGrid& grid,
                                         const CellQuery& query, const GeometryTolerances& tol) {
  thread_local ConvexPolytope poly;
  poly.reset_cube(0.5, g.id);
  double reach = kCubeReach;
  const double own_r2 = g.radius * g.radius;
  double rmax = grid.max_radius();
  if (query.extra != nullptr) rmax = std::max(rmax, query.extra->radius);
  const double rmax2 = rmax * rmax;
  // No radical plane of a generator farther than this can cut the cell.
  auto limit = [&] { return reach + std::sqrt(std::max(0.0, reach * reach + rmax2 - own_r2)); };

  if (query.extra != nullptr && query.extra->id != g.id) {
    if (cut_by_images(poly, g, *query.extra, reach, tol) == ClipOutcome::Emptied) return std::nullopt;
  }

  // Bins are visited in groups of equal distance bound; within a group the
  // closest radical planes go first so the cell shrinks quickly.
  struct Candidate {
    double offset;
    Vec3 d;
    double radius;
    GeneratorId id;
    Vec3 shift;
  };
  thread_local std::vector<Candidate> group;
  const auto home = grid.bin_of(g.position);
  const auto& offsets = grid.offsets();
  std::array<int, 3> target{};
  Vec3 shift;
  std::size_t i = 0;
  while (i < offsets.size()) {
    const double lim = limit();
    const double lb = offsets[i].lower_bound;
    if (lb > lim) break;
    group.clear();
    for (; i < offsets.size() && offsets[i].lower_bound == lb; ++i) {
      if (grid.gap_squared(g.position, home, offsets[i].delta) > lim * lim) continue;
      grid.resolve(home, offsets[i].delta, target, shift);
      for (const auto& e : grid.bin(target)) {
        if (e.id == g.id || e.id == query.hidden) continue;
        const Vec3 d = e.position + shift - g.position;
        const double dd = norm2(d);
        const double offset = 0.5 * (dd + own_r2 - e.radius * e.radius) / std::sqrt(dd);
        if (offset >= reach + tol.plane) continue;
        group.push_back({offset, d, e.radius, e.id, shift});
      }
    }
    std::sort(group.begin(), group.end(),
              [](const Candidate& a, const Candidate& b) { return a.offset < b.offset; });
    for (const auto& c : group) {
      if (cut(poly, own_r2, c.d, c.radius, c.id, c.shift, reach, tol) == ClipOutcome::Emptied) {
        return std::nullopt;
      }
    }
  }
  return poly.finish(g, tol);
}

std::set<GeneratorId> TessellationProposal::touched_ids() const {
  std::set<GeneratorId> ids(removed_ids.begin(), removed_ids.end());
  for (const auto& u : updates) ids.insert(u.id);
  return ids;
}

// ---------------------------------------------------------------------------

LocalTessellator::LocalTessellator(Configuration config, const GeometryTolerances& tol)
    : tol_(tol), config_(std::move(config)) {
  reset_index();
  rebuild();
}

LocalTessellator::LocalTessellator(Configuration config, Tessellation tess,
                                   const GeometryTolerances& tol)
    : tol_(tol), config_(std::move(config)), tess_(std::move(tess)) {
  if (tess_.cells.size() + tess_.excluded_ids.size() != config_.size()) {
    throw InvalidParameter("tessellation does not match configuration");
  }
  for (const auto& g : config_.generators()) {
    if (!tess_.cells.contains(g.id) && !tess_.excluded_ids.contains(g.id)) {
      throw InvalidParameter("generator " + std::to_string(g.id) + " missing from tessellation");
    }
  }
  reset_index();
  for (const auto& [id, c] : tess_.cells) reaches_.insert(c.reach);
}

void LocalTessellator::reset_index() {
  grid_ = PeriodicGrid(config_, PeriodicGrid::suggested_bins(config_.size()));
}

void LocalTessellator::maybe_regrid() {
  const int want = PeriodicGrid::suggested_bins(config_.size());
  const int have = grid_.bins_per_axis();
  if (want > 2 * have || 2 * want < have) reset_index();
}

void LocalTessellator::rebuild() {
  tess_ = Tessellation{};
  reaches_.clear();
  for (const auto& g : config_.sorted_by_id()) {
    if (auto cell = compute_cell(g, grid_, {}, tol_)) {
      tess_.cells.emplace(g.id, std::move(*cell));
    } else {
      tess_.excluded_ids.insert(g.id);
    }
  }
  auto partner = [this](GeneratorId id) -> const CellGeometry* {
    auto it = tess_.cells.find(id);
    return it == tess_.cells.end() ? nullptr : &it->second;
  };
  for (auto& [id, cell] : tess_.cells) reconcile_cell(cell, partner, tol_);
  for (const auto& [id, cell] : tess_.cells) {
    reaches_.insert(cell.reach);
    for (GeneratorId j : distinct_neighbors(cell)) {
      if (tess_.cells.contains(j) && has_face_with(tess_.cells.at(j), id)) {
        tess_.neighbor_pairs.insert(ordered(id, j));
      }
    }
  }
}

void LocalTessellator::validate_change(const ConfigurationChange& change) const {
  auto check_generator = [](const MarkedGenerator& g) {
    for (int k = 0; k < 3; ++k) {
      if (!(g.position[k] >= 0.0 && g.position[k] < 1.0)) {
        throw InvalidParameter("proposed position is not canonical");
      }
    }
    if (!std::isfinite(g.radius) || g.radius < 0.0) throw InvalidParameter("bad radius");
  };
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Insert>) {
          if (config_.contains(c.generator.id)) {
            throw InvalidParameter("insert reuses id " + std::to_string(c.generator.id));
          }
          check_generator(c.generator);
          if (config_.occupied(c.generator.position)) {
            throw DegenerateInput("insert onto an occupied position");
          }
        } else if constexpr (std::is_same_v<T, Delete>) {
          if (!config_.contains(c.id)) throw UnknownId("unknown generator id " + std::to_string(c.id));
        } else {
          if (!config_.contains(c.id)) throw UnknownId("unknown generator id " + std::to_string(c.id));
          check_generator(MarkedGenerator{c.id, c.position, c.radius});
          if (!(config_.at(c.id).position == c.position) && config_.occupied(c.position)) {
            throw DegenerateInput("move onto an occupied position");
          }
        }
      },
      change);
}

TessellationProposal LocalTessellator::propose(const ConfigurationChange& change) const {
  return propose(change, CellVeto{});
}

TessellationProposal LocalTessellator::propose(const ConfigurationChange& change,
                                               const CellVeto& veto, bool veto_emptied) const {
  validate_change(change);

  TessellationProposal p;
  p.change = change;

  MarkedGenerator incoming;  // inserted or moved generator
  bool has_incoming = false;
  CellQuery query;
  std::vector<GeneratorId> scratch;  // recomputed from scratch besides `incoming`

  auto old_cell = [this](GeneratorId id) -> const CellGeometry* {
    auto it = tess_.cells.find(id);
    return it == tess_.cells.end() ? nullptr : &it->second;
  };
  auto add_departure = [&](GeneratorId id) {
    if (const auto* c = old_cell(id)) {
      for (GeneratorId j : distinct_neighbors(*c)) scratch.push_back(j);
    }
    for (GeneratorId e : tess_.excluded_ids) {
      if (e != id) scratch.push_back(e);
    }
  };

  auto vetoes = [&](const CellUpdate& u) {
    if (u.cell ? veto && veto(*u.cell)
               : veto_emptied && (old_cell(u.id) != nullptr || (has_incoming && u.id == incoming.id))) {
      p.vetoed = true;
      return true;
    }
    return false;
  };

  if (const auto* ins = std::get_if<Insert>(&change)) {
    incoming = ins->generator;
    has_incoming = true;
  } else if (const auto* del = std::get_if<Delete>(&change)) {
    p.removed_ids.push_back(del->id);
    query.hidden = del->id;
    add_departure(del->id);
  } else {
    const auto& mv = std::get<Move>(change);
    incoming = MarkedGenerator{mv.id, mv.position, mv.radius};
    has_incoming = true;
    query.hidden = mv.id;
    add_departure(mv.id);
  }
  std::sort(scratch.begin(), scratch.end());
  scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
  std::erase(scratch, incoming.id);

  if (has_incoming) {
    if (query.hidden == kNoGenerator && config_.contains(incoming.id)) {
      throw InvalidParameter("insert reuses id " + std::to_string(incoming.id));
    }
    query.extra = &incoming;
    CellQuery own{query.hidden, nullptr};
    p.updates.push_back({incoming.id, compute_cell(incoming, grid_, own, tol_)});
    if (vetoes(p.updates.back())) return p;
  }
  for (GeneratorId id : scratch) {
    p.updates.push_back({id, compute_cell(config_.at(id), grid_, query, tol_)});
    if (vetoes(p.updates.back())) return p;
  }

  // Cells outside the recomputed set only lose the region the incoming
  // generator claims; clip them in place.
  if (has_incoming && p.updates.front().cell.has_value()) {
    const double rc = reaches_.empty() ? kCubeReach : *reaches_.rbegin();
    const double reach_bound = rc + std::sqrt(rc * rc + incoming.radius * incoming.radius);
    for (GeneratorId id : grid_.ids_near(incoming.position, reach_bound)) {
      if (id == incoming.id || std::binary_search(scratch.begin(), scratch.end(), id)) continue;
      const CellGeometry* c = old_cell(id);
      if (c == nullptr || !plane_reaches(*c, incoming, tol_)) continue;
      auto poly = ConvexPolytope::from_cell(*c);
      double reach = c->reach;
      const MarkedGenerator self{id, c->generator_position, c->radius};
      const auto outcome = cut_by_images(poly, self, incoming, reach, tol_);
      if (outcome == ClipOutcome::Untouched) continue;
      if (outcome == ClipOutcome::Emptied) {
        p.updates.push_back({id, std::nullopt});
        if (vetoes(p.updates.back())) return p;
      } else {
        p.updates.push_back({id, poly.finish(self, tol_)});
        if (vetoes(p.updates.back())) return p;
      }
    }
  }

  // Consistency between proposed and untouched cells.
  std::unordered_map<GeneratorId, std::size_t> slot;
  for (std::size_t i = 0; i < p.updates.size(); ++i) slot.emplace(p.updates[i].id, i);
  auto is_removed = [&](GeneratorId id) {
    return std::find(p.removed_ids.begin(), p.removed_ids.end(), id) != p.removed_ids.end();
  };
  auto view = [&](GeneratorId id) -> const CellGeometry* {
    if (auto it = slot.find(id); it != slot.end()) {
      const auto& cell = p.updates[it->second].cell;
      return cell ? &*cell : nullptr;
    }
    if (is_removed(id)) return nullptr;
    return old_cell(id);
  };
  const std::size_t direct = p.updates.size();
  for (std::size_t i = 0; i < direct; ++i) {
    if (p.updates[i].cell) reconcile_cell(*p.updates[i].cell, view, tol_);
  }
  std::vector<GeneratorId> touched(p.removed_ids);
  for (std::size_t i = 0; i < direct; ++i) touched.push_back(p.updates[i].id);
  for (GeneratorId t : touched) {
    const CellGeometry* before = old_cell(t);
    if (before == nullptr) continue;
    const CellGeometry* after = view(t);
    for (GeneratorId j : distinct_neighbors(*before)) {
      if (slot.contains(j) || is_removed(j)) continue;
      if (after != nullptr && has_face_with(*after, j)) continue;
      // Untouched neighbor still faces t although t no longer faces it.
      CellGeometry fixed = *old_cell(j);
      for (const auto& f : fixed.faces) {
        if (f.neighbor == t && f.area >= tol_.asymmetric_face_area) {
          throw GeometryFailure("cell " + std::to_string(j) + " keeps a face of area " +
                                std::to_string(f.area) + " towards changed cell " +
                                std::to_string(t));
        }
      }
      drop_faces_with(fixed, t);
      slot.emplace(j, p.updates.size());
      p.updates.push_back({j, std::move(fixed)});
    }
  }

  // Empty-cell bookkeeping and the pair difference.
  for (const auto& u : p.updates) {
    if (u.cell) continue;
    if (old_cell(u.id) != nullptr || (has_incoming && u.id == incoming.id)) {
      p.newly_empty.push_back(u.id);
    }
  }
  std::set<NeighborPair> removed_pairs;
  for (GeneratorId t : p.touched_ids()) {
    const CellGeometry* before = old_cell(t);
    if (before == nullptr) continue;
    p.old_cells.push_back(before);
    for (GeneratorId j : distinct_neighbors(*before)) {
      const auto pair = ordered(t, j);
      if (tess_.neighbor_pairs.contains(pair) && removed_pairs.insert(pair).second) {
        p.pairs_removed.push_back({pair.first, pair.second, old_cell(pair.first)->volume,
                                   old_cell(pair.second)->volume});
      }
    }
  }
  std::set<NeighborPair> added_pairs;
  for (const auto& u : p.updates) {
    if (!u.cell) continue;
    for (GeneratorId j : distinct_neighbors(*u.cell)) {
      const CellGeometry* other = view(j);
      if (other == nullptr || !has_face_with(*other, u.id)) continue;
      const auto pair = ordered(u.id, j);
      if (added_pairs.insert(pair).second) {
        p.pairs_added.push_back(
            {pair.first, pair.second, view(pair.first)->volume, view(pair.second)->volume});
      }
    }
  }
  return p;
}

std::vector<GeneratorId> LocalTessellator::commit(const TessellationProposal& p,
                                                  EmptyCellPolicy policy) {
  if (p.vetoed) throw InvalidParameter("a vetoed proposal cannot be committed");
  std::visit(
      [this](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Insert>) {
          config_.insert(c.generator);
          grid_.insert(c.generator);
        } else if constexpr (std::is_same_v<T, Delete>) {
          const MarkedGenerator old = config_.at(c.id);
          config_.erase(c.id);
          grid_.erase(old.id, old.position, old.radius);
        } else {
          const MarkedGenerator old = config_.at(c.id);
          config_.move(c.id, c.position, c.radius);
          grid_.erase(old.id, old.position, old.radius);
          grid_.insert(MarkedGenerator{c.id, c.position, c.radius});
        }
      },
      p.change);

  for (const auto& pr : p.pairs_removed) tess_.neighbor_pairs.erase({pr.a, pr.b});
  auto drop_cell = [this](GeneratorId id) {
    auto it = tess_.cells.find(id);
    if (it == tess_.cells.end()) return;
    reaches_.erase(reaches_.find(it->second.reach));
    tess_.cells.erase(it);
  };
  for (GeneratorId id : p.removed_ids) {
    drop_cell(id);
    tess_.excluded_ids.erase(id);
  }
  for (const auto& u : p.updates) {
    drop_cell(u.id);
    if (u.cell) {
      reaches_.insert(u.cell->reach);
      tess_.cells.insert_or_assign(u.id, *u.cell);
      tess_.excluded_ids.erase(u.id);
    } else {
      tess_.excluded_ids.insert(u.id);
    }
  }
  for (const auto& pr : p.pairs_added) tess_.neighbor_pairs.insert({pr.a, pr.b});

  std::vector<GeneratorId> dropped;
  if (policy == EmptyCellPolicy::RemoveGenerator) dropped = purge_excluded();
  maybe_regrid();
  return dropped;
}

std::vector<GeneratorId> LocalTessellator::purge_excluded() {
  std::vector<GeneratorId> dropped(tess_.excluded_ids.begin(), tess_.excluded_ids.end());
  for (GeneratorId id : dropped) {
    const MarkedGenerator g = config_.at(id);
    config_.erase(id);
    grid_.erase(id, g.position, g.radius);
  }
  tess_.excluded_ids.clear();
  return dropped;
}

}  // namespace glt
