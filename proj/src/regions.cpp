#include "claps/regions.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace claps {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::vector<Eigen::Vector3d> sphere_lattice(int n, std::uint64_t seed, bool jitter) {
  if (n < 4) throw std::invalid_argument("sphere_lattice: need n >= 4");
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    pts.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  if (jitter) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    Eigen::Quaterniond q(n01(rng), n01(rng), n01(rng), n01(rng));
    q.normalize();
    const Eigen::Matrix3d rot = q.toRotationMatrix();
    for (auto& p : pts) p = rot * p;
  }
  return pts;
}

const std::vector<Triangle>& sphere_triangulation(int n) {
  static std::mutex mutex;
  static std::map<int, std::vector<Triangle>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) {
    const auto pts = sphere_lattice(n);
    it = cache.emplace(n, convex_hull(pts)).first;
  }
  return it->second;
}

Eigen::Matrix3d spd_sqrt(const Eigen::Matrix3d& m) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (m + m.transpose()));
  const Eigen::Vector3d root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

/// Linear map taking unit-sphere samples onto the region boundary in the
/// score's residual coordinates: sqrt(chi2) (zeta cov)^(1/2) for Mahalanobis
/// kinds, q_hat * I for L2 kinds.
Eigen::Matrix3d boundary_map(const GaussianPrediction& pred, const CalibrationResult& cal) {
  if (cal.vacuous) throw std::invalid_argument("region: calibration is vacuous (infinite region)");
  if (is_mahalanobis(cal.score_kind)) {
    return std::sqrt(cal.chi2_q) * spd_sqrt(cal.zeta * pred.cov);
  }
  return cal.q_hat * Eigen::Matrix3d::Identity();
}

}  // namespace

std::vector<AlgebraVector> boundary_points(const GaussianPrediction& pred,
                                           const CalibrationResult& cal, int n, std::uint64_t seed,
                                           bool jitter) {
  if (!is_lie(cal.score_kind)) {
    throw std::invalid_argument("boundary_points: requires a Lie score kind");
  }
  if (n < 4) throw std::invalid_argument("boundary_points: need n >= 4");
  const Eigen::Matrix3d shape = boundary_map(pred, cal);
  const double limit = kPi - kClipMargin;
  std::vector<AlgebraVector> out;
  out.reserve(n);
  for (const Eigen::Vector3d& u : sphere_lattice(n, seed, jitter)) {
    AlgebraVector e = shape * u;
    e(2) = std::clamp(e(2), -limit, limit);
    out.push_back(e);
  }
  return out;
}

bool is_clipped(const AlgebraVector& e) { return std::abs(e(2)) >= kPi - kClipMargin; }

std::vector<GeneralizedConfig> map_to_cspace(std::span<const AlgebraVector> points,
                                             const GaussianPrediction& pred) {
  std::vector<GeneralizedConfig> out;
  out.reserve(points.size());
  for (const AlgebraVector& e : points) {
    if (!in_diffeomorphic_domain(e)) {
      throw DomainError("map_to_cspace: point outside the diffeomorphic domain");
    }
    out.push_back(kinematics_inv(pred.mean * exp(e)));
  }
  return out;
}

RegionMesh reconstruct_mesh(const GaussianPrediction& pred, const CalibrationResult& cal, int n,
                            std::uint64_t seed, bool jitter) {
  if (n < 4) throw std::invalid_argument("reconstruct_mesh: need n >= 4 boundary samples");
  RegionMesh mesh;
  mesh.reference_heading = pred.mean.theta();
  mesh.vertices.reserve(n);
  mesh.clipped.reserve(n);

  if (is_lie(cal.score_kind)) {
    // The algebra region is an ellipsoid, i.e. an affine image of the unit
    // sphere, so the hull of the lattice gives the hull of the samples.
    for (const AlgebraVector& e : boundary_points(pred, cal, n, seed, jitter)) {
      const Pose g = pred.mean * exp(e);
      mesh.vertices.emplace_back(g.x(), g.y(), mesh.reference_heading + e(2));
      mesh.clipped.push_back(is_clipped(e));
    }
  } else {
    const Eigen::Matrix3d shape = boundary_map(pred, cal);
    const Eigen::Vector3d center(pred.mean.x(), pred.mean.y(), pred.mean.theta());
    for (const Eigen::Vector3d& u : sphere_lattice(n, seed, jitter)) {
      mesh.vertices.push_back(center + shape * u);
      mesh.clipped.push_back(false);
    }
  }
  mesh.triangles = sphere_triangulation(n);
  mesh.volume = mesh_volume(mesh.vertices, mesh.triangles);
  mesh.bbox_lo = mesh.bbox_hi = mesh.vertices.front();
  for (const auto& v : mesh.vertices) {
    mesh.bbox_lo = mesh.bbox_lo.cwiseMin(v);
    mesh.bbox_hi = mesh.bbox_hi.cwiseMax(v);
  }
  mesh.source.n_samples = n;
  return mesh;
}

bool mesh_contains(const RegionMesh& mesh, const Pose& query) {
  const Eigen::Vector3d p(query.x(), query.y(),
                          mesh.reference_heading + wrap_angle(query.theta() - mesh.reference_heading));
  if ((p.array() < mesh.bbox_lo.array()).any() || (p.array() > mesh.bbox_hi.array()).any()) {
    return false;
  }
  double solid = 0.0;
  for (const Triangle& t : mesh.triangles) {
    const Eigen::Vector3d a = mesh.vertices[t[0]] - p;
    const Eigen::Vector3d b = mesh.vertices[t[1]] - p;
    const Eigen::Vector3d c = mesh.vertices[t[2]] - p;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    solid += 2.0 * std::atan2(num, den);
  }
  return solid > 2.0 * kPi;  // winding number > 1/2
}

double mesh_coverage(std::span<const Pose> particles, const RegionMesh& mesh) {
  if (particles.empty()) throw std::invalid_argument("mesh_coverage: no particles");
  std::size_t inside = 0;
  for (const Pose& p : particles) inside += mesh_contains(mesh, p) ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(particles.size());
}

double empirical_coverage(std::span<const Pose> particles, const GaussianPrediction& pred,
                          const CalibrationResult& cal) {
  if (particles.empty()) throw std::invalid_argument("empirical_coverage: no particles");
  const std::vector<bool> inside = contains_batch(particles, pred, cal);
  const auto hits = std::count(inside.begin(), inside.end(), true);
  return static_cast<double>(hits) / static_cast<double>(particles.size());
}

Eigen::Vector2d Footprint::center(const Cell& c) const {
  return {(c.ix + 0.5) * resolution, (c.iy + 0.5) * resolution};
}

namespace {

Cell cell_of(double x, double y, double res) {
  return {static_cast<int>(std::floor(x / res)), static_cast<int>(std::floor(y / res))};
}

void normalize(std::vector<Cell>& cells) {
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

void rasterize(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
               double res, std::vector<Cell>& out) {
  out.push_back(cell_of(a.x(), a.y(), res));
  out.push_back(cell_of(b.x(), b.y(), res));
  out.push_back(cell_of(c.x(), c.y(), res));
  const double area = cross2(b - a, c - a);
  if (std::abs(area) <= 0.0) return;
  const Cell lo = cell_of(std::min({a.x(), b.x(), c.x()}), std::min({a.y(), b.y(), c.y()}), res);
  const Cell hi = cell_of(std::max({a.x(), b.x(), c.x()}), std::max({a.y(), b.y(), c.y()}), res);
  const double sign = area > 0.0 ? 1.0 : -1.0;
  const double tol = -1e-12 * std::abs(area);
  for (int ix = lo.ix; ix <= hi.ix; ++ix) {
    for (int iy = lo.iy; iy <= hi.iy; ++iy) {
      const Eigen::Vector2d p((ix + 0.5) * res, (iy + 0.5) * res);
      const double w0 = sign * cross2(b - a, p - a);
      const double w1 = sign * cross2(c - b, p - b);
      const double w2 = sign * cross2(a - c, p - c);
      if (w0 >= tol && w1 >= tol && w2 >= tol) out.push_back({ix, iy});
    }
  }
}

void check_resolution(double resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("footprint: resolution must be positive");
}

}  // namespace

Footprint footprint(const RegionMesh& mesh, double resolution) {
  check_resolution(resolution);
  Footprint fp;
  fp.resolution = resolution;
  for (const Triangle& t : mesh.triangles) {
    rasterize(mesh.vertices[t[0]].head<2>(), mesh.vertices[t[1]].head<2>(),
              mesh.vertices[t[2]].head<2>(), resolution, fp.cells);
  }
  normalize(fp.cells);
  return fp;
}

Footprint particle_footprint(std::span<const Pose> particles, double resolution) {
  check_resolution(resolution);
  Footprint fp;
  fp.resolution = resolution;
  fp.cells.reserve(particles.size());
  for (const Pose& p : particles) fp.cells.push_back(cell_of(p.x(), p.y(), resolution));
  normalize(fp.cells);
  return fp;
}

double iou(const Footprint& a, const Footprint& b) {
  if (a.resolution != b.resolution) throw std::invalid_argument("iou: resolutions differ");
  std::size_t inter = 0;
  auto ia = a.cells.begin();
  auto ib = b.cells.begin();
  while (ia != a.cells.end() && ib != b.cells.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter, ++ia, ++ib;
    }
  }
  const std::size_t uni = a.cells.size() + b.cells.size() - inter;
  if (uni == 0) throw std::invalid_argument("iou: empty union");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

void write_mesh_vertices_csv(std::ostream& os, const RegionMesh& mesh) {
  os << "x,y,theta,clipped\n";
  os.precision(17);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    os << v.x() << ',' << v.y() << ',' << v.z() << ',' << (mesh.clipped[i] ? 1 : 0) << '\n';
  }
}

void write_mesh_triangles_csv(std::ostream& os, const RegionMesh& mesh) {
  os << "i,j,k\n";
  for (const Triangle& t : mesh.triangles) os << t[0] << ',' << t[1] << ',' << t[2] << '\n';
}

void write_footprint_csv(std::ostream& os, const Footprint& fp) {
  os << "x,y\n";
  os.precision(17);
  for (const Cell& c : fp.cells) {
    const Eigen::Vector2d p = fp.center(c);
    os << p.x() << ',' << p.y() << '\n';
  }
}

}  // namespace claps
