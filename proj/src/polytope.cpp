#include "glt/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace glt {

namespace {

Vec3 any_perpendicular(const Vec3& n) {
  const Vec3 axis = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  const Vec3 u = cross(n, axis);
  return u / norm(u);
}

}  // namespace

ConvexPolytope ConvexPolytope::centered_cube(double h, GeneratorId self) {
  ConvexPolytope p;
  p.reset_cube(h, self);
  return p;
}

void ConvexPolytope::reset_cube(double h, GeneratorId self) {
  vertices_.assign({{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h},
                    {-h, -h, h},  {h, -h, h},  {h, h, h},  {-h, h, h}});
  faces_.resize(6);
  auto face = [&](int slot, std::initializer_list<int> loop, Vec3 n, ImageShift image) {
    Face& f = faces_[slot];
    f.loop.assign(loop);
    f.normal = n;
    f.offset = h;
    f.label = FaceLabel{self, image};
  };
  face(0, {0, 3, 2, 1}, {0, 0, -1}, {0, 0, -1});
  face(1, {4, 5, 6, 7}, {0, 0, 1}, {0, 0, 1});
  face(2, {0, 1, 5, 4}, {0, -1, 0}, {0, -1, 0});
  face(3, {3, 7, 6, 2}, {0, 1, 0}, {0, 1, 0});
  face(4, {0, 4, 7, 3}, {-1, 0, 0}, {-1, 0, 0});
  face(5, {1, 2, 6, 5}, {1, 0, 0}, {1, 0, 0});
}

ConvexPolytope ConvexPolytope::from_cell(const CellGeometry& cell) {
  ConvexPolytope p;
  p.vertices_ = cell.vertices;
  p.faces_.reserve(cell.faces.size());
  for (const auto& f : cell.faces) {
    p.faces_.push_back({f.vertices, f.normal, f.offset, FaceLabel{f.neighbor, f.image}});
  }
  return p;
}

double ConvexPolytope::reach_squared() const {
  double r2 = 0.0;
  for (const auto& v : vertices_) r2 = std::max(r2, norm2(v));
  return r2;
}

double ConvexPolytope::support(const Vec3& n) const {
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& v : vertices_) s = std::max(s, dot(n, v));
  return s;
}

ClipOutcome ConvexPolytope::clip(const Vec3& n, double offset, const FaceLabel& label,
                                 const GeometryTolerances& tol) {
  const int nv = static_cast<int>(vertices_.size());
  dist_.resize(nv);
  side_.resize(nv);
  bool any_out = false;
  bool any_in = false;
  for (int i = 0; i < nv; ++i) {
    const double s = dot(n, vertices_[i]) - offset;
    dist_[i] = s;
    if (s > tol.plane) {
      side_[i] = Side::Out;
      any_out = true;
    } else if (s < -tol.plane) {
      side_[i] = Side::In;
      any_in = true;
    } else {
      side_[i] = Side::On;
    }
  }
  if (!any_out) return ClipOutcome::Untouched;
  if (!any_in) {
    vertices_.clear();
    faces_.clear();
    return ClipOutcome::Emptied;
  }

  auto& kept = kept_;
  kept.clear();
  remap_.assign(nv, -1);
  cap_.clear();
  in_cap_.clear();
  for (int i = 0; i < nv; ++i) {
    if (side_[i] == Side::Out) continue;
    remap_[i] = static_cast<int>(kept.size());
    kept.push_back(vertices_[i]);
    in_cap_.push_back(side_[i] == Side::On ? 1 : 0);
    if (side_[i] == Side::On) cap_.push_back(remap_[i]);
  }

  edge_points_.clear();
  const double merge2 = tol.merge * tol.merge;
  auto edge_vertex = [&](int a, int b) {
    const int lo = std::min(a, b);
    const int hi = std::max(a, b);
    for (const auto& e : edge_points_) {
      if (e.a == lo && e.b == hi) return e.index;
    }
    const int in = side_[a] == Side::In ? a : b;
    const int out = in == a ? b : a;
    const double t = dist_[in] / (dist_[in] - dist_[out]);
    const Vec3 p = vertices_[in] + (vertices_[out] - vertices_[in]) * t;
    int index;
    if (norm2(p - vertices_[in]) <= merge2) {
      index = remap_[in];
    } else {
      index = static_cast<int>(kept.size());
      kept.push_back(p);
      in_cap_.push_back(0);
    }
    if (!in_cap_[index]) {
      in_cap_[index] = 1;
      cap_.push_back(index);
    }
    edge_points_.push_back({lo, hi, index});
    return index;
  };

  auto& loop = loop_;
  std::size_t live = 0;
  for (std::size_t fi = 0; fi < faces_.size(); ++fi) {
    auto& face = faces_[fi];
    loop.clear();
    const int m = static_cast<int>(face.loop.size());
    for (int k = 0; k < m; ++k) {
      const int a = face.loop[k];
      const int b = face.loop[(k + 1) % m];
      if (side_[a] != Side::Out) loop.push_back(remap_[a]);
      if ((side_[a] == Side::In && side_[b] == Side::Out) ||
          (side_[a] == Side::Out && side_[b] == Side::In)) {
        loop.push_back(edge_vertex(a, b));
      }
    }
    // Collapse repeats introduced by merged vertices.
    auto last = std::unique(loop.begin(), loop.end());
    loop.erase(last, loop.end());
    while (loop.size() > 1 && loop.front() == loop.back()) loop.pop_back();
    if (loop.size() < 3) continue;
    face.loop.swap(loop);
    if (fi != live) std::swap(faces_[live], face);
    ++live;
  }
  faces_.resize(live);

  if (cap_.size() >= 3) {
    Vec3 c;
    for (int i : cap_) c += kept[i];
    c = c / static_cast<double>(cap_.size());
    Vec3 u = kept[cap_[0]] - c;
    u -= n * dot(n, u);
    const double ul = norm(u);
    u = ul > 0.0 ? u / ul : any_perpendicular(n);
    const Vec3 w = cross(n, u);
    auto& order = order_;
    order.clear();
    for (int i : cap_) {
      const Vec3 d = kept[i] - c;
      order.emplace_back(std::atan2(dot(d, w), dot(d, u)), i);
    }
    std::sort(order.begin(), order.end());
    Face& cap = faces_.emplace_back();
    cap.loop.reserve(order.size());
    for (const auto& [angle, i] : order) cap.loop.push_back(i);
    cap.normal = n;
    cap.offset = offset;
    cap.label = label;
  }

  vertices_.swap(kept);
  return ClipOutcome::Cut;
}

std::optional<CellGeometry> ConvexPolytope::finish(const MarkedGenerator& g,
                                                   const GeometryTolerances& tol) const {
  if (vertices_.empty()) return std::nullopt;

  CellGeometry cell;
  cell.generator_id = g.id;
  cell.generator_position = g.position;
  cell.radius = g.radius;
  cell.faces.reserve(faces_.size());

  double volume = 0.0;
  Vec3 moment;
  for (const auto& f : faces_) {
    const auto& L = f.loop;
    Vec3 area_vec;
    for (std::size_t k = 0; k < L.size(); ++k) {
      area_vec += cross(vertices_[L[k]], vertices_[L[(k + 1) % L.size()]]);
    }
    const double area = 0.5 * norm(area_vec);
    if (area < tol.min_face_area) continue;
    const Vec3& a = vertices_[L[0]];
    for (std::size_t k = 1; k + 1 < L.size(); ++k) {
      const Vec3& b = vertices_[L[k]];
      const Vec3& c = vertices_[L[k + 1]];
      const double v6 = dot(a, cross(b, c));
      volume += v6;
      moment += (a + b + c) * v6;
    }
    CellFace out;
    out.vertices = f.loop;
    out.neighbor = f.label.neighbor;
    out.image = f.label.image;
    out.normal = f.normal;
    out.offset = f.offset;
    out.area = area;
    cell.faces.push_back(std::move(out));
  }
  volume /= 6.0;
  if (!(volume > 0.0)) return std::nullopt;
  const Vec3 local_bary = moment / (24.0 * volume);

  cell.volume = volume;
  cell.barycenter = wrap_to_torus(g.position + local_bary);
  cell.h_min = std::numeric_limits<double>::infinity();
  cell.h_max = 0.0;
  for (const auto& f : cell.faces) {
    const double h = f.offset - dot(f.normal, local_bary);
    cell.h_min = std::min(cell.h_min, h);
    cell.h_max = std::max(cell.h_max, h);
    if (f.neighbor != g.id) ++cell.nof;
  }
  cell.reach = std::sqrt(reach_squared());
  cell.vertices = vertices_;
  return cell;
}

}  // namespace glt
