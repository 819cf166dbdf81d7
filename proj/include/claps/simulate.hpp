#pragma once

#include "claps/dynamics.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace claps {

using Rng = std::mt19937_64;

/// Name recorded in dataset headers for the stream-derivation scheme.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64 seeded by splitmix64(master, fnv1a(stream), index)";

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for an independent stream identified by (master seed, stream name, index).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index);

/// Ground-truth environment. Differs from the approximate model through the
/// inertia, viscous friction and additive wrench noise.
struct WorldParams {
  Eigen::Matrix3d inertia = Eigen::Vector3d(2.8 * 1.15, 2.8 * 1.15, 0.007 * 1.3).asDiagonal();
  Eigen::Matrix2d q_cont = Eigen::Vector2d(0.005, 0.001).asDiagonal();
  double c_lin = 0.3;
  double c_ang = 0.005;
  double substep_hz = 60.0;
  double horizon = 0.5;
  std::uint64_t seed = 42;
  /// Draw a fresh wrench perturbation every substep instead of once per planning step.
  bool per_substep_noise = false;

  /// Noise-free world whose dynamics equal the approximate model.
  static WorldParams matched(const Eigen::Matrix3d& inertia);

  int substeps() const;
  double substep_dt() const { return horizon / substeps(); }
  /// Throws std::invalid_argument if substep_hz * horizon is not a positive integer.
  void validate() const;
};

/// Linear range lin(lo, hi, count).
struct LinRange {
  double lo = 0.0;
  double hi = 0.0;
  int count = 1;

  double at(int i) const;
};

/// Grid over (initial forward speed, initial yaw rate, forward accel, yaw accel).
/// Commanded accelerations are turned into wrenches with the approximate
/// model's mass and yaw inertia.
struct GridSpec {
  LinRange speed{0.1, 0.5, 3};
  LinRange yaw_rate{0.0, 0.5, 3};
  LinRange accel{0.0, 0.5, 3};
  LinRange yaw_accel{0.0, 2.0, 3};
  int repetitions = 500;
  double command_mass = 2.8;
  double command_inertia = 0.007;

  std::size_t cases() const;
  void validate() const;
};

/// (s0, u) pair; s0 starts at the identity pose.
struct Case {
  LieState s0;
  ControlInput u;
};

/// The i-th grid point in row-major order over (speed, yaw_rate, accel, yaw_accel).
Case grid_case(const GridSpec& grid, std::size_t index);

/// Uniform draw of a case from the bounding box of the grid ranges.
Case uniform_case(const GridSpec& box, Rng& rng);

struct TransitionRecord {
  LieState s0;
  ControlInput u_des;
  LieState s1;
  std::uint64_t seed = 0;
};

/// Wrench-noise sampler for a PSD covariance.
class WrenchNoise {
 public:
  explicit WrenchNoise(const Eigen::Matrix2d& covariance);
  Eigen::Vector2d sample(Rng& rng) const;
  bool zero() const { return zero_; }

 private:
  Eigen::Matrix2d factor_;
  bool zero_ = true;
};

/// Twist rate of the true world: constrained EPS with friction wrench -C xi.
Twist world_accel(const Twist& xi, const Eigen::Vector2d& u_cmd, const LieModel& model,
                  const WorldParams& world);

/// One planning step of the true system, forward Euler at the substep rate.
LieState true_step(const LieState& s, const ControlInput& u_des, const WorldParams& world,
                   Rng& rng);

/// Seeded variant; the stream depends on the seed only.
LieState true_step(const LieState& s, const ControlInput& u_des, const WorldParams& world,
                   std::uint64_t seed);

/// |cases| * repetitions records, ordered case-major. Record i uses the stream
/// derive_seed(world.seed, "dataset", i), so any subset regenerates identically.
std::vector<TransitionRecord> gen_grid_dataset(const GridSpec& grid, const WorldParams& world,
                                               std::string_view stream = "dataset");

/// `count` records whose (s0, u) is drawn uniformly from the grid's bounding box.
std::vector<TransitionRecord> gen_uniform_dataset(const GridSpec& box, std::size_t count,
                                                  const WorldParams& world,
                                                  std::string_view stream = "dataset");

/// N independent rollouts of one planning step; particle k uses derive_seed(seed, "particle", k).
std::vector<Pose> mc_particles(const LieState& s0, const ControlInput& u_des,
                               const WorldParams& world, std::size_t n, std::uint64_t seed);

/// Least-squares diag(m, m, I) from finite-difference accelerations of
/// constant-wrench records over a horizon of length dt.
Eigen::Matrix3d estimate_inertia(const std::vector<TransitionRecord>& records, double dt);

}  // namespace claps
