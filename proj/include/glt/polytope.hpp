#pragma once

#include <utility>
#include <vector>

#include "glt/geometry.hpp"

namespace glt {

struct FaceLabel {
  GeneratorId neighbor = kNoGenerator;
  ImageShift image{0, 0, 0};
};

enum class ClipOutcome { Untouched, Cut, Emptied };

/// Convex polytope stored as a vertex list plus oriented face loops, clipped
/// in place by half-spaces dot(normal, y) <= offset with unit normals.
class ConvexPolytope {
 public:
  struct Face {
    std::vector<int> loop;
    Vec3 normal;
    double offset = 0.0;
    FaceLabel label;
  };

  ConvexPolytope() = default;

  /// Axis-aligned cube [-h, h]^3; each face is labelled as shared with the
  /// image of `self` across it.
  static ConvexPolytope centered_cube(double half_width, GeneratorId self);

  /// Same as centered_cube, reusing this object's storage.
  void reset_cube(double half_width, GeneratorId self);

  /// Rebuild a polytope from finished cell geometry.
  static ConvexPolytope from_cell(const CellGeometry& cell);

  ClipOutcome clip(const Vec3& unit_normal, double offset, const FaceLabel& label,
                   const GeometryTolerances& tol);

  /// Largest squared vertex norm.
  double reach_squared() const;

  /// Largest value of dot(n, v) over vertices.
  double support(const Vec3& n) const;

  bool empty() const { return vertices_.empty(); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }

  /// Converts into cell geometry for the generator `g`; nullopt when nothing
  /// of positive volume is left after dropping sliver faces.
  std::optional<CellGeometry> finish(const MarkedGenerator& g, const GeometryTolerances& tol) const;

 private:
  enum class Side : unsigned char { In, On, Out };
  struct EdgePoint {
    int a, b, index;
  };

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;

  // Scratch buffers reused across clips.
  std::vector<double> dist_;
  std::vector<Side> side_;
  std::vector<int> remap_;
  std::vector<EdgePoint> edge_points_;
  std::vector<int> cap_;
  std::vector<char> in_cap_;
  std::vector<Vec3> kept_;
  std::vector<int> loop_;
  std::vector<std::pair<double, int>> order_;
};

}  // namespace glt
