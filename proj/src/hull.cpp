#include "claps/hull.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace claps {

namespace {

struct Face {
  Triangle v;
  Eigen::Vector3d normal;
  double offset = 0.0;
  bool alive = true;
};

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

class HullBuilder {
 public:
  HullBuilder(std::span<const Eigen::Vector3d> pts, double eps) : pts_(pts), eps_(eps) {}

  void add_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    f.normal = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    const double len = f.normal.norm();
    if (len > 0.0) f.normal /= len;
    f.offset = f.normal.dot(pts_[a]);
    const int id = static_cast<int>(faces_.size());
    faces_.push_back(f);
    edges_[edge_key(a, b)] = id;
    edges_[edge_key(b, c)] = id;
    edges_[edge_key(c, a)] = id;
  }

  void remove_face(int id) {
    Face& f = faces_[id];
    f.alive = false;
    for (int k = 0; k < 3; ++k) {
      auto it = edges_.find(edge_key(f.v[k], f.v[(k + 1) % 3]));
      if (it != edges_.end() && it->second == id) edges_.erase(it);
    }
  }

  double distance(const Face& f, int p) const { return f.normal.dot(pts_[p]) - f.offset; }

  void insert(int p) {
    visible_.clear();
    for (int i = 0; i < static_cast<int>(faces_.size()); ++i) {
      if (faces_[i].alive && distance(faces_[i], p) > eps_) visible_.push_back(i);
    }
    if (visible_.empty()) return;
    std::set<int> visible_set(visible_.begin(), visible_.end());
    std::vector<std::pair<int, int>> horizon;
    for (int id : visible_) {
      const Triangle& t = faces_[id].v;
      for (int k = 0; k < 3; ++k) {
        const int a = t[k];
        const int b = t[(k + 1) % 3];
        auto it = edges_.find(edge_key(b, a));
        if (it == edges_.end() || !visible_set.count(it->second)) horizon.emplace_back(a, b);
      }
    }
    for (int id : visible_) remove_face(id);
    for (const auto& [a, b] : horizon) add_face(a, b, p);
  }

  std::vector<Triangle> triangles() const {
    std::vector<Triangle> out;
    for (const Face& f : faces_) {
      if (f.alive) out.push_back(f.v);
    }
    return out;
  }

 private:
  std::span<const Eigen::Vector3d> pts_;
  double eps_;
  std::vector<Face> faces_;
  std::unordered_map<std::uint64_t, int> edges_;
  std::vector<int> visible_;
};

}  // namespace

std::vector<Triangle> convex_hull(std::span<const Eigen::Vector3d> points) {
  const int n = static_cast<int>(points.size());
  if (n < 4) throw std::invalid_argument("convex_hull: need at least 4 points");

  double scale = 0.0;
  for (const auto& p : points) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  if (!(scale > 0.0)) throw std::invalid_argument("convex_hull: all points coincide");
  const double eps = 1e-12 * scale;

  // Initial tetrahedron from well-separated points.
  int i0 = 0, i1 = -1, i2 = -1, i3 = -1;
  double best = 0.0;
  for (int i = 1; i < n; ++i) {
    const double d = (points[i] - points[i0]).norm();
    if (d > best) best = d, i1 = i;
  }
  if (i1 < 0 || best <= eps) throw std::invalid_argument("convex_hull: degenerate point set");
  best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = (points[i1] - points[i0]).cross(points[i] - points[i0]).norm();
    if (d > best) best = d, i2 = i;
  }
  if (i2 < 0 || best <= eps * scale) throw std::invalid_argument("convex_hull: collinear point set");
  const Eigen::Vector3d normal = (points[i1] - points[i0]).cross(points[i2] - points[i0]);
  best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(normal.dot(points[i] - points[i0]));
    if (d > best) best = d, i3 = i;
  }
  if (i3 < 0 || best <= eps * scale * scale) {
    throw std::invalid_argument("convex_hull: coplanar point set");
  }

  HullBuilder hull(points, eps);
  if (normal.dot(points[i3] - points[i0]) > 0.0) std::swap(i1, i2);
  hull.add_face(i0, i1, i2);
  hull.add_face(i0, i3, i1);
  hull.add_face(i1, i3, i2);
  hull.add_face(i2, i3, i0);

  for (int i = 0; i < n; ++i) {
    if (i == i0 || i == i1 || i == i2 || i == i3) continue;
    hull.insert(i);
  }
  return hull.triangles();
}

double mesh_volume(std::span<const Eigen::Vector3d> vertices, std::span<const Triangle> triangles) {
  if (vertices.empty() || triangles.empty()) return 0.0;
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& v : vertices) c += v;
  c /= static_cast<double>(vertices.size());
  double six_v = 0.0;
  for (const Triangle& t : triangles) {
    const Eigen::Vector3d a = vertices[t[0]] - c;
    const Eigen::Vector3d b = vertices[t[1]] - c;
    const Eigen::Vector3d d = vertices[t[2]] - c;
    six_v += a.dot(b.cross(d));
  }
  return six_v / 6.0;
}

int euler_characteristic(std::span<const Triangle> triangles) {
  std::set<int> verts;
  std::set<std::pair<int, int>> edges;
  for (const Triangle& t : triangles) {
    for (int k = 0; k < 3; ++k) {
      verts.insert(t[k]);
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      edges.emplace(std::min(a, b), std::max(a, b));
    }
  }
  return static_cast<int>(verts.size()) - static_cast<int>(edges.size()) +
         static_cast<int>(triangles.size());
}

bool is_closed_manifold(std::span<const Triangle> triangles) {
  std::map<std::pair<int, int>, int> directed;
  for (const Triangle& t : triangles) {
    for (int k = 0; k < 3; ++k) {
      if (++directed[{t[k], t[(k + 1) % 3]}] > 1) return false;
    }
  }
  for (const auto& [edge, count] : directed) {
    if (!directed.count({edge.second, edge.first})) return false;
  }
  return true;
}

}  // namespace claps
