#pragma once

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace claps {

using Triangle = std::array<int, 3>;

/// Incremental 3-D convex hull. Returns outward-oriented triangles indexing
/// into `points`. Throws std::invalid_argument when fewer than four
/// non-coplanar points are given.
std::vector<Triangle> convex_hull(std::span<const Eigen::Vector3d> points);

/// Signed volume enclosed by a closed triangle mesh, by tetrahedra against
/// the vertex centroid. Positive for outward orientation.
double mesh_volume(std::span<const Eigen::Vector3d> vertices, std::span<const Triangle> triangles);

/// V - E + F of a triangle mesh over the vertices it references.
int euler_characteristic(std::span<const Triangle> triangles);

/// True when every undirected edge is shared by exactly two triangles with
/// opposite orientation.
bool is_closed_manifold(std::span<const Triangle> triangles);

}  // namespace claps
