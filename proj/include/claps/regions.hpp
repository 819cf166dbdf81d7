#pragma once

#include "claps/conformal.hpp"
#include "claps/estimate.hpp"
#include "claps/hull.hpp"
#include "claps/se2.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace claps {

/// Margin kept inside |theta| < pi when clipping boundary samples.
inline constexpr double kClipMargin = 1e-6;

/// Deterministic Fibonacci lattice of n unit vectors. With jitter the whole
/// lattice is rotated by a seeded random rotation (connectivity unchanged).
std::vector<Eigen::Vector3d> sphere_lattice(int n, std::uint64_t seed = 0, bool jitter = false);

/// Outward triangulation of sphere_lattice(n); computed once per n and cached.
const std::vector<Triangle>& sphere_triangulation(int n);

/// Symmetric square root of an SPD matrix.
Eigen::Matrix3d spd_sqrt(const Eigen::Matrix3d& m);

/// Boundary of the calibrated algebra set, clipped to |theta| <= pi - kClipMargin.
/// Only Lie score kinds are accepted. Throws on vacuous calibrations or n < 4.
std::vector<AlgebraVector> boundary_points(const GaussianPrediction& pred,
                                           const CalibrationResult& cal, int n,
                                           std::uint64_t seed = 0, bool jitter = false);

/// True when a boundary sample was moved by the clipping step.
bool is_clipped(const AlgebraVector& e);

/// e -> kinematics_inv(mean * exp(e)). Throws DomainError outside |theta| < pi.
std::vector<GeneralizedConfig> map_to_cspace(std::span<const AlgebraVector> points,
                                             const GaussianPrediction& pred);

struct MeshSource {
  std::string prediction_fingerprint;
  std::string calibration_fingerprint;
  int n_samples = 0;
};

/// Closed triangulated region in C-space. Vertex headings are lifted
/// continuously around `reference_heading` (the prediction's mean heading),
/// so a region straddling the +-pi seam stays in one piece.
struct RegionMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Triangle> triangles;
  std::vector<bool> clipped;
  double volume = 0.0;
  double reference_heading = 0.0;
  Eigen::Vector3d bbox_lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d bbox_hi = Eigen::Vector3d::Zero();
  MeshSource source;
};

/// Region mesh for any score kind. Lie kinds push the algebra boundary
/// forward through kinematics_inv(mean * exp(.)); state-space kinds place the
/// ellipsoid (or ball) directly in generalized coordinates.
RegionMesh reconstruct_mesh(const GaussianPrediction& pred, const CalibrationResult& cal, int n,
                            std::uint64_t seed = 0, bool jitter = false);

/// Point-in-mesh by generalized winding number; the query heading is lifted
/// to the branch nearest the mesh's reference heading.
bool mesh_contains(const RegionMesh& mesh, const Pose& query);

double mesh_coverage(std::span<const Pose> particles, const RegionMesh& mesh);

/// Fraction of particles inside the region by the membership test.
double empirical_coverage(std::span<const Pose> particles, const GaussianPrediction& pred,
                          const CalibrationResult& cal);

struct Cell {
  int ix = 0;
  int iy = 0;
  auto operator<=>(const Cell&) const = default;
};

/// Occupied cells of a planar grid with origin (0, 0) and square cells.
struct Footprint {
  double resolution = 0.005;
  std::vector<Cell> cells;  // sorted, unique

  bool empty() const { return cells.empty(); }
  Eigen::Vector2d center(const Cell& c) const;
};

/// Rasterizes every mesh triangle projected to (x, y).
Footprint footprint(const RegionMesh& mesh, double resolution);

/// Cells containing at least one particle.
Footprint particle_footprint(std::span<const Pose> particles, double resolution);

/// |a n b| / |a u b|. Throws when the union is empty or resolutions differ.
double iou(const Footprint& a, const Footprint& b);

void write_mesh_vertices_csv(std::ostream& os, const RegionMesh& mesh);
void write_mesh_triangles_csv(std::ostream& os, const RegionMesh& mesh);
void write_footprint_csv(std::ostream& os, const Footprint& fp);

}  // namespace claps
