#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "glt/vec3.hpp"

namespace glt {

using GeneratorId = std::int64_t;
inline constexpr GeneratorId kNoGenerator = -1;

/// A point of the unit torus carrying a radius mark.
struct MarkedGenerator {
  GeneratorId id = kNoGenerator;
  Vec3 position;
  double radius = 0.0;

  friend bool operator==(const MarkedGenerator&, const MarkedGenerator&) = default;
};

/// ||y - g.position||^2 - g.radius^2, without any periodic reduction.
double power_distance(const Vec3& y, const MarkedGenerator& g);

/// Representative of b - a modulo 1 with every component in [-0.5, 0.5).
Vec3 torus_displacement(const Vec3& a, const Vec3& b);

/// Canonical representative in [0, 1)^3.
Vec3 wrap_to_torus(const Vec3& p);

struct Insert {
  MarkedGenerator generator;
};
struct Delete {
  GeneratorId id = kNoGenerator;
};
struct Move {
  GeneratorId id = kNoGenerator;
  Vec3 position;
  double radius = 0.0;
};
using ConfigurationChange = std::variant<Insert, Delete, Move>;

/// Finite marked configuration on the unit torus.
///
/// Ids are unique and never reused; positions are canonical (each coordinate
/// in [0, 1)) and pairwise distinct. Radii must be finite and nonnegative; the
/// upper mark bound is a sampler concern and is not enforced here.
/// Generators are kept in a dense vector whose order is deterministic given
/// the history of operations (erase swaps the last element into the hole).
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::vector<MarkedGenerator> generators);

  /// Assigns ids 0..n-1 in order.
  static Configuration from_points(std::span<const Vec3> positions, std::span<const double> radii);

  std::size_t size() const { return generators_.size(); }
  bool empty() const { return generators_.empty(); }
  bool contains(GeneratorId id) const { return index_.contains(id); }
  bool occupied(const Vec3& position) const { return positions_.contains(key_of(position)); }

  const MarkedGenerator& at(GeneratorId id) const;
  const MarkedGenerator& by_index(std::size_t i) const { return generators_[i]; }
  std::span<const MarkedGenerator> generators() const { return generators_; }
  GeneratorId next_id() const { return next_id_; }

  /// Throws DegenerateInput on a coinciding position, InvalidParameter on a
  /// non-canonical position or bad radius, and on a reused id.
  void insert(const MarkedGenerator& g);
  GeneratorId insert(const Vec3& position, double radius);
  void erase(GeneratorId id);
  void move(GeneratorId id, const Vec3& position, double radius);
  void apply(const ConfigurationChange& change);

  /// Order-independent hash of (id, position bits, radius bits).
  std::uint64_t fingerprint() const;

  std::vector<MarkedGenerator> sorted_by_id() const;

 private:
  struct PositionKey {
    std::uint64_t x, y, z;
    bool operator==(const PositionKey&) const = default;
  };
  struct PositionKeyHash {
    std::size_t operator()(const PositionKey& k) const;
  };
  static PositionKey key_of(const Vec3& p);
  static void validate(const MarkedGenerator& g);

  std::vector<MarkedGenerator> generators_;
  std::unordered_map<GeneratorId, std::size_t> index_;
  std::unordered_set<PositionKey, PositionKeyHash> positions_;
  GeneratorId next_id_ = 0;
};

/// Which periodic image of a neighbor a face is shared with.
using ImageShift = std::array<std::int8_t, 3>;

struct CellFace {
  std::vector<int> vertices;  // counter-clockwise seen from outside
  GeneratorId neighbor = kNoGenerator;
  ImageShift image{0, 0, 0};
  Vec3 normal;       // outward unit normal
  double offset = 0; // supporting plane: dot(normal, y) == offset in the local frame
  double area = 0;
};

/// Geometry of one nonempty Laguerre cell. Vertices live in the local frame
/// of the generator (generator at the origin, not torus-reduced).
struct CellGeometry {
  GeneratorId generator_id = kNoGenerator;
  Vec3 generator_position;
  double radius = 0.0;

  std::vector<Vec3> vertices;
  std::vector<CellFace> faces;

  double volume = 0.0;
  Vec3 barycenter;  // torus-reduced
  int nof = 0;      // faces shared with other generators
  double h_min = 0.0;
  double h_max = 0.0;
  double reach = 0.0;  // max vertex distance from the generator

  /// True when some face separates the cell from one of its own images
  /// (only happens for very sparse configurations).
  bool touches_own_image() const;
};

struct GeometryTolerances {
  double plane = 1e-12;          // vertex-on-plane classification
  double merge = 1e-12;          // vertex merge distance
  double min_face_area = 1e-18;  // faces below are dropped
  double asymmetric_face_area = 1e-9;  // one-sided faces below are discarded, above is a failure
};

using NeighborPair = std::pair<GeneratorId, GeneratorId>;  // first < second

struct Tessellation {
  std::map<GeneratorId, CellGeometry> cells;
  std::set<NeighborPair> neighbor_pairs;
  std::set<GeneratorId> excluded_ids;

  double total_volume() const;
  const CellGeometry& cell(GeneratorId id) const;
};

Tessellation build_tessellation(const Configuration& config, const GeometryTolerances& tol = {});

/// Superset of the ids whose cell differs after applying the change,
/// including the changed id(s).
std::set<GeneratorId> affected_ids(const Tessellation& tess, const Configuration& config,
                                   const ConfigurationChange& change,
                                   const GeometryTolerances& tol = {});

struct ChangeResult {
  Tessellation tessellation;
  Configuration configuration;
  std::vector<GeneratorId> newly_empty;  // generators whose cell vanished because of the change
};

/// Generators whose cells become empty stay in the configuration and are
/// recorded in excluded_ids; they are also listed in newly_empty.
ChangeResult apply_change(const Tessellation& tess, const Configuration& config,
                          const ConfigurationChange& change, const GeometryTolerances& tol = {});

/// Plain-text export, one record per cell ordered by id:
///   cell <id> volume <v> nof <k> barycenter <x y z>
///   v x y z
///   f i1 i2 ... / neighbor_id
void write_geometry(std::ostream& out, const Tessellation& tess);

}  // namespace glt
