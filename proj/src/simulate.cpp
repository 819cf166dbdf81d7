#include "claps/simulate.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace claps {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(splitmix64(splitmix64(master) ^ h) ^ index);
}

WorldParams WorldParams::matched(const Eigen::Matrix3d& inertia) {
  WorldParams w;
  w.inertia = inertia;
  w.q_cont.setZero();
  w.c_lin = 0.0;
  w.c_ang = 0.0;
  return w;
}

int WorldParams::substeps() const {
  validate();
  return static_cast<int>(std::llround(substep_hz * horizon));
}

void WorldParams::validate() const {
  const double n = substep_hz * horizon;
  if (!(n >= 0.5) || std::abs(n - std::round(n)) > 1e-9) {
    throw std::invalid_argument("WorldParams: substep_hz * horizon must be a positive integer");
  }
  if (!(q_cont.allFinite()) || !q_cont.isApprox(q_cont.transpose())) {
    throw std::invalid_argument("WorldParams: q_cont must be symmetric");
  }
}

double LinRange::at(int i) const {
  if (count <= 1) return lo;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

std::size_t GridSpec::cases() const {
  return static_cast<std::size_t>(speed.count) * yaw_rate.count * accel.count * yaw_accel.count;
}

void GridSpec::validate() const {
  for (const LinRange* r : {&speed, &yaw_rate, &accel, &yaw_accel}) {
    if (r->count < 1 || !std::isfinite(r->lo) || !std::isfinite(r->hi)) {
      throw std::invalid_argument("GridSpec: counts must be >= 1 and ranges finite");
    }
  }
  if (repetitions < 1) throw std::invalid_argument("GridSpec: repetitions must be >= 1");
}

namespace {

Case make_case(double speed, double yaw_rate, double accel, double yaw_accel,
               const GridSpec& grid) {
  Case c;
  c.s0.pose = Pose::identity();
  c.s0.twist = Twist(speed, 0.0, yaw_rate);
  c.u = {grid.command_mass * accel, grid.command_inertia * yaw_accel};
  return c;
}

}  // namespace

Case grid_case(const GridSpec& grid, std::size_t index) {
  if (index >= grid.cases()) throw std::out_of_range("grid_case: index out of range");
  std::size_t rest = index;
  const int iw = static_cast<int>(rest % grid.yaw_accel.count);
  rest /= grid.yaw_accel.count;
  const int ia = static_cast<int>(rest % grid.accel.count);
  rest /= grid.accel.count;
  const int ir = static_cast<int>(rest % grid.yaw_rate.count);
  rest /= grid.yaw_rate.count;
  const int is = static_cast<int>(rest);
  return make_case(grid.speed.at(is), grid.yaw_rate.at(ir), grid.accel.at(ia),
                   grid.yaw_accel.at(iw), grid);
}

Case uniform_case(const GridSpec& box, Rng& rng) {
  auto draw = [&](const LinRange& r) {
    std::uniform_real_distribution<double> d(std::min(r.lo, r.hi), std::max(r.lo, r.hi));
    return r.lo == r.hi ? r.lo : d(rng);
  };
  const double speed = draw(box.speed);
  const double yaw_rate = draw(box.yaw_rate);
  const double accel = draw(box.accel);
  const double yaw_accel = draw(box.yaw_accel);
  return make_case(speed, yaw_rate, accel, yaw_accel, box);
}

WrenchNoise::WrenchNoise(const Eigen::Matrix2d& covariance) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (covariance + covariance.transpose()));
  if (es.eigenvalues().minCoeff() < -1e-15) {
    throw std::invalid_argument("WrenchNoise: covariance must be positive semidefinite");
  }
  const Eigen::Vector2d root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = es.eigenvectors() * root.asDiagonal();
  zero_ = root.maxCoeff() == 0.0;
}

Eigen::Vector2d WrenchNoise::sample(Rng& rng) const {
  if (zero_) return Eigen::Vector2d::Zero();
  std::normal_distribution<double> n01(0.0, 1.0);
  const double a = n01(rng);
  const double b = n01(rng);
  return factor_ * Eigen::Vector2d(a, b);
}

Twist world_accel(const Twist& xi, const Eigen::Vector2d& u_cmd, const LieModel& model,
                  const WorldParams& world) {
  const Eigen::Vector3d friction(-world.c_lin * xi(0), -world.c_lin * xi(1), -world.c_ang * xi(2));
  return eps_accel(xi, ControlInput::from_vector(u_cmd), model, friction);
}

namespace {

LieState rollout(const LieState& s, const ControlInput& u_des, const WorldParams& world,
                 const LieModel& model, const WrenchNoise& noise, Rng& rng) {
  const int n = world.substeps();
  const double h = world.horizon / n;
  LieState state = s;
  Eigen::Vector2d perturbation = noise.sample(rng);
  for (int i = 0; i < n; ++i) {
    if (world.per_substep_noise && i > 0) perturbation = noise.sample(rng);
    const Eigen::Vector2d u_cmd = u_des.vector() + perturbation;
    state = lie_step(state, h, Method::FE,
                     [&](const Twist& xi) { return world_accel(xi, u_cmd, model, world); });
  }
  return state;
}

}  // namespace

LieState true_step(const LieState& s, const ControlInput& u_des, const WorldParams& world,
                   Rng& rng) {
  const LieModel model = LieModel::unicycle(world.inertia);
  const WrenchNoise noise(world.q_cont);
  return rollout(s, u_des, world, model, noise, rng);
}

LieState true_step(const LieState& s, const ControlInput& u_des, const WorldParams& world,
                   std::uint64_t seed) {
  Rng rng(seed);
  return true_step(s, u_des, world, rng);
}

std::vector<TransitionRecord> gen_grid_dataset(const GridSpec& grid, const WorldParams& world,
                                               std::string_view stream) {
  grid.validate();
  world.validate();
  const LieModel model = LieModel::unicycle(world.inertia);
  const WrenchNoise noise(world.q_cont);
  std::vector<TransitionRecord> out;
  out.reserve(grid.cases() * grid.repetitions);
  std::uint64_t index = 0;
  for (std::size_t c = 0; c < grid.cases(); ++c) {
    const Case cs = grid_case(grid, c);
    for (int r = 0; r < grid.repetitions; ++r, ++index) {
      TransitionRecord rec;
      rec.s0 = cs.s0;
      rec.u_des = cs.u;
      rec.seed = derive_seed(world.seed, stream, index);
      Rng rng(rec.seed);
      rec.s1 = rollout(rec.s0, rec.u_des, world, model, noise, rng);
      out.push_back(rec);
    }
  }
  return out;
}

std::vector<TransitionRecord> gen_uniform_dataset(const GridSpec& box, std::size_t count,
                                                  const WorldParams& world,
                                                  std::string_view stream) {
  box.validate();
  world.validate();
  const LieModel model = LieModel::unicycle(world.inertia);
  const WrenchNoise noise(world.q_cont);
  std::vector<TransitionRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    TransitionRecord rec;
    rec.seed = derive_seed(world.seed, stream, i);
    Rng rng(rec.seed);
    const Case cs = uniform_case(box, rng);
    rec.s0 = cs.s0;
    rec.u_des = cs.u;
    rec.s1 = rollout(rec.s0, rec.u_des, world, model, noise, rng);
    out.push_back(rec);
  }
  return out;
}

std::vector<Pose> mc_particles(const LieState& s0, const ControlInput& u_des,
                               const WorldParams& world, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("mc_particles: need at least one particle");
  world.validate();
  const LieModel model = LieModel::unicycle(world.inertia);
  const WrenchNoise noise(world.q_cont);
  std::vector<Pose> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, "particle", k));
    out.push_back(rollout(s0, u_des, world, model, noise, rng).pose);
  }
  return out;
}

Eigen::Matrix3d estimate_inertia(const std::vector<TransitionRecord>& records, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("estimate_inertia: dt must be positive");
  double f_a = 0.0, a_a = 0.0, t_b = 0.0, b_b = 0.0;
  for (const TransitionRecord& r : records) {
    const double lin = (r.s1.twist(0) - r.s0.twist(0)) / dt;
    const double ang = (r.s1.twist(2) - r.s0.twist(2)) / dt;
    f_a += r.u_des.fx * lin;
    a_a += lin * lin;
    t_b += r.u_des.tz * ang;
    b_b += ang * ang;
  }
  if (!(a_a > 0.0) || !(b_b > 0.0)) {
    throw std::invalid_argument(
        "estimate_inertia: degenerate regression (no linear or no angular excitation)");
  }
  const double mass = f_a / a_a;
  const double yaw_inertia = t_b / b_b;
  return Eigen::Vector3d(mass, mass, yaw_inertia).asDiagonal();
}

}  // namespace claps
