#pragma once

#include <functional>

#include <optional>
#include <set>
#include <vector>

#include "glt/geometry.hpp"
#include "glt/periodic_grid.hpp"

namespace glt {

/// Adjustments to the grid contents when computing a cell for a proposal:
/// `hidden` is ignored, `extra` is treated as present.
struct CellQuery {
  GeneratorId hidden = kNoGenerator;
  const MarkedGenerator* extra = nullptr;
};

/// Laguerre cell of g on the torus, or nullopt if it is empty. Starts from the
/// unit cube around g (the bound set by its own images) and clips by radical
/// planes of neighbors found in `grid`, stopping once no further image can
/// reach the cell.
std::optional<CellGeometry> compute_cell(const MarkedGenerator& g, const PeriodicGrid& grid,
                                         const CellQuery& query, const GeometryTolerances& tol);

enum class EmptyCellPolicy {
  RemoveGenerator,  // generators of empty cells leave the configuration
  KeepGenerator,    // they stay, recorded in excluded_ids
};

struct CellUpdate {
  GeneratorId id = kNoGenerator;
  std::optional<CellGeometry> cell;  // nullopt: the cell is empty after the change
};

struct PairRecord {
  GeneratorId a = kNoGenerator;
  GeneratorId b = kNoGenerator;
  double volume_a = 0.0;
  double volume_b = 0.0;
};

/// Everything that differs between the current tessellation and the one of
/// the changed configuration. Computing it does not touch the engine.
struct TessellationProposal {
  ConfigurationChange change;
  std::vector<GeneratorId> removed_ids;   // deleted generator(s)
  std::vector<CellUpdate> updates;        // new state of every affected cell
  std::vector<GeneratorId> newly_empty;   // nonempty (or new) before, empty after
  std::vector<const CellGeometry*> old_cells;  // previous geometry of updated/removed cells
  std::vector<PairRecord> pairs_removed;
  std::vector<PairRecord> pairs_added;
  bool vetoed = false;  // computation stopped at a vetoed cell; cannot be committed

  std::set<GeneratorId> touched_ids() const;
};

/// Owns a configuration, its tessellation and a spatial index, and keeps
/// them consistent under single-generator changes by recomputing only the
/// cells a change can reach.
///
/// A change to generator g recomputes from scratch g itself and every face
/// neighbor it had; every other cell whose reach touches the radical plane of
/// g's new position is clipped in place. Empty generators are re-examined on
/// deletions and moves, since removing a dominant generator can revive them.
class LocalTessellator {
 public:
  explicit LocalTessellator(Configuration config, const GeometryTolerances& tol = {});
  LocalTessellator(Configuration config, Tessellation tess, const GeometryTolerances& tol = {});

  const Configuration& configuration() const { return config_; }
  const Tessellation& tessellation() const { return tess_; }
  const GeometryTolerances& tolerances() const { return tol_; }

  TessellationProposal propose(const ConfigurationChange& change) const;

  /// As propose, but stops as soon as a computed cell satisfies `veto` or,
  /// with `veto_emptied`, as soon as a nonempty or incoming cell turns empty.
  using CellVeto = std::function<bool(const CellGeometry&)>;
  TessellationProposal propose(const ConfigurationChange& change, const CellVeto& veto,
                               bool veto_emptied = false) const;

  /// Applies a proposal computed against the current state. Returns the ids
  /// removed from the configuration because their cell became empty (always
  /// empty with KeepGenerator).
  std::vector<GeneratorId> commit(const TessellationProposal& proposal, EmptyCellPolicy policy);

  /// Drop generators of empty cells from the configuration.
  std::vector<GeneratorId> purge_excluded();

  void rebuild();

 private:
  void validate_change(const ConfigurationChange& change) const;
  void reset_index();
  void maybe_regrid();

  GeometryTolerances tol_;
  Configuration config_;
  Tessellation tess_;
  PeriodicGrid grid_;
  std::multiset<double> reaches_;
};

}  // namespace glt
