#include "claps/dynamics.hpp"

#include "oracles.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace claps;

namespace {

constexpr double kPi = std::numbers::pi;
const Eigen::Matrix3d kInertia = default_model_inertia();

/// Constrained twist (v, 0, w) with moderate magnitudes.
Twist random_constrained(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> v(-1.0, 1.0);
  return {v(rng), 0.0, 2.0 * v(rng)};
}

ControlInput random_input(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(-2.0, 2.0);
  return {f(rng), 0.01 * f(rng)};
}

double pose_distance(const Pose& a, const Pose& b) {
  return std::hypot(a.x() - b.x(), a.y() - b.y(), wrap_angle(a.theta() - b.theta()));
}

}  // namespace

TEST(BodyJacobian, Examples) {
  EXPECT_LT((body_jacobian({0, 0, 0}) - Eigen::Matrix3d::Identity()).norm(), 1e-15);
  Eigen::Matrix3d expected;
  expected << 0, 1, 0, -1, 0, 0, 0, 0, 1;
  EXPECT_LT((body_jacobian({3, -1, kPi / 2}) - expected).norm(), 1e-15);
}

TEST(BodyJacobian, MatchesFiniteDifferenceTwist) {
  auto q_of = [](double t) {
    return GeneralizedConfig{std::sin(t), t * t, 0.5 * t + 0.3};
  };
  auto dq_of = [](double t) { return Eigen::Vector3d(std::cos(t), 2 * t, 0.5); };
  for (double t : {0.0, 0.4, 1.3}) {
    const Eigen::Vector3d twist = body_jacobian(q_of(t)) * dq_of(t);
    double previous = 0.0;
    for (double h : {1e-3, 1e-4}) {
      const Eigen::Matrix3d g0 = kinematics_map(q_of(t)).matrix();
      const Eigen::Matrix3d g1 = kinematics_map(q_of(t + h)).matrix();
      const Eigen::Matrix3d rate = (g0.inverse() * g1 - Eigen::Matrix3d::Identity()) / h;
      const double err = (vee(rate) - twist).norm();
      EXPECT_LT(err, 10 * h);
      if (previous > 0.0) {
        EXPECT_LT(err, 0.2 * previous);  // first order in h
      }
      previous = err;
    }
  }
}

TEST(Conversion, UnicycleMatricesAreConfigurationIndependent) {
  const Eigen::Matrix<double, 3, 2> b_body = (Eigen::Matrix<double, 3, 2>() << 1, 0, 0, 0, 0, 1).finished();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int i = 0; i < 50; ++i) {
    const GeneralizedConfig q{ang(rng), ang(rng), ang(rng)};
    EXPECT_LT((convert_constraint(SSModel::constraint(q.vector()), q) - Eigen::RowVector3d(0, -1, 0)).norm(), 1e-15);
    EXPECT_LT((convert_input(SSModel::input_map(q.vector()), q) - b_body).norm(), 1e-15);
    const Eigen::Matrix3d m = Eigen::Vector3d(2.0, 2.0, 0.3).asDiagonal();
    EXPECT_LT((convert_inertia(m, q) - m).norm(), 1e-14);
  }
}

TEST(Projection, DiagonalInertiaGivesLateralProjector) {
  const Projection p = projection_matrix(kInertia, Eigen::RowVector3d(0, 1, 0));
  Eigen::Matrix3d e2 = Eigen::Matrix3d::Zero();
  e2(1, 1) = 1.0;
  EXPECT_LT((p.projector - e2).norm(), 1e-15);
  EXPECT_LT((p.complement - (Eigen::Matrix3d::Identity() - e2)).norm(), 1e-15);
}

TEST(Projection, IdempotentAndAnnihilatesConstraint) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d m = oracle::random_spd(rng);
    const Eigen::RowVector3d a(n01(rng), n01(rng), n01(rng));
    const Projection p = projection_matrix(m, a);
    EXPECT_LT((p.projector * p.projector - p.projector).norm(), 1e-12);
    const Eigen::Vector3d v(n01(rng), n01(rng), n01(rng));
    EXPECT_LT(std::abs(a * p.complement * v), 1e-12 * (1 + v.norm()));
  }
  EXPECT_THROW(projection_matrix(kInertia, Eigen::RowVector3d::Zero()), std::invalid_argument);
}

TEST(EpsAccel, Examples) {
  const LieModel model = LieModel::unicycle(kInertia);
  EXPECT_TRUE(eps_accel(Twist::Zero(), {}, model).isZero(0.0));
  // Straight coasting: ad^T M xi is purely lateral and is projected out.
  EXPECT_LT(eps_accel(Twist(0.7, 0, 0), {}, model).norm(), 1e-15);
  const Twist turning(0.4, 0.0, 0.9);
  const Twist rate = eps_accel(turning, {}, model);
  EXPECT_EQ(rate(1), 0.0);
  EXPECT_LT((rate - eps_accel_multiplier(turning, {}, model)).norm(), 1e-12);
  // Forward/lateral coupling in M gives the Coriolis term forward and yaw parts.
  Eigen::Matrix3d m = kInertia;
  m(0, 1) = m(1, 0) = 0.05;
  m(0, 2) = m(2, 0) = 0.02;
  const LieModel coupled = LieModel::unicycle(m);
  const Twist r2 = eps_accel(turning, {}, coupled);
  EXPECT_NEAR(r2(1), 0.0, 1e-15);
  EXPECT_GT(r2.head<1>().norm() + std::abs(r2(2)), 1e-6);
  EXPECT_LT((r2 - eps_accel_multiplier(turning, {}, coupled)).norm(), 1e-12);
}

TEST(EpsAccel, ConstantWrenchGivesConstantRates) {
  const LieModel model = LieModel::unicycle(kInertia);
  const Twist rate = eps_accel(Twist(0.3, 0, 0.2), {1.4, 0.007}, model);
  EXPECT_NEAR(rate(0), 1.4 / 2.8, 1e-15);
  EXPECT_NEAR(rate(2), 1.0, 1e-15);
}

TEST(SsAccel, Examples) {
  const SSModel model(kInertia);
  EXPECT_TRUE(ss_accel(Eigen::Vector3d(1, 2, 0.3), Eigen::Vector3d::Zero(), {}, model).isZero(1e-15));
  const Eigen::Vector3d qdd = ss_accel(Eigen::Vector3d::Zero(), Eigen::Vector3d(0.5, 0, 0), {1.4, 0}, model);
  EXPECT_LT((qdd - Eigen::Vector3d(0.5, 0, 0)).norm(), 1e-15);
}

TEST(SsAccel, AgreesWithEpsThroughKinematics) {
  // d/dt (R(theta) [v; vy]) = R(theta) [dv; dvy] + w R(theta + pi/2) [v; vy].
  const SSModel ss(kInertia);
  const LieModel lie = LieModel::unicycle(kInertia);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int i = 0; i < 1000; ++i) {
    const Twist xi = random_constrained(rng);
    const ControlInput u = random_input(rng);
    const double th = ang(rng);
    const Eigen::Vector3d q(0.2, -0.4, th);
    const Eigen::Vector3d dq = oracle::kinematic_rate(q, xi);
    const Twist rate = eps_accel(xi, u, lie);
    const Eigen::Rotation2Dd r(th), r90(th + kPi / 2);
    Eigen::Vector3d expected;
    expected.head<2>() = r * rate.head<2>() + xi(2) * (r90 * xi.head<2>());
    expected(2) = rate(2);
    EXPECT_LT((ss_accel(q, dq, u, ss) - expected).norm(), 1e-9);
  }
}

TEST(Step, RejectsUnsupportedPairingsAndBadSteps) {
  const LieModel lie = LieModel::unicycle(kInertia);
  const SSModel ss(kInertia);
  EXPECT_THROW(step(LieState{}, {}, 0.1, Method::RK4, lie), std::invalid_argument);
  EXPECT_THROW(step(SSState{}, {}, 0.1, Method::CF4, ss), std::invalid_argument);
  EXPECT_THROW(step(LieState{}, {}, 0.0, Method::FE, lie), std::invalid_argument);
  EXPECT_THROW(step(SSState{}, {}, -1.0, Method::FE, ss), std::invalid_argument);
  EXPECT_TRUE(supports(Method::RK4, Space::StateSpace));
  EXPECT_FALSE(supports(Method::RK4, Space::Lie));
  EXPECT_TRUE(supports(Method::CF4, Space::Lie));
  EXPECT_FALSE(supports(Method::CF4, Space::StateSpace));
  EXPECT_EQ(method_from_string("Heun"), Method::Heun);
  EXPECT_THROW(method_from_string("Midpoint"), std::invalid_argument);
}

TEST(Step, ForwardEulerCoastingTranslates) {
  const LieModel lie = LieModel::unicycle(kInertia);
  const LieState s{Pose(), Twist(0.8, 0, 0)};
  const LieState next = step(s, {}, 0.05, Method::FE, lie);
  EXPECT_NEAR(next.pose.x(), 0.04, 1e-16);
  EXPECT_EQ(next.pose.y(), 0.0);
  EXPECT_EQ(next.pose.theta(), 0.0);
}

TEST(Step, Cf4IsExactForConstantTwist) {
  const LieModel lie = LieModel::unicycle(kInertia);
  for (double dt : {0.01, 0.1, 0.5}) {
    const LieState s{Pose(0.3, -0.2, 1.0), Twist(0.6, 0, 1.4)};
    const LieState next = step(s, {}, dt, Method::CF4, lie);
    EXPECT_LT(pose_distance(next.pose, s.pose * exp(dt * s.twist)), 1e-12);
  }
}

TEST(Step, ConstraintPreservedByAllMethods) {
  const LieModel lie = LieModel::unicycle(Eigen::Vector3d(2.0, 3.0, 0.05).asDiagonal());
  const SSModel ss(kInertia);
  std::mt19937_64 rng(4);
  for (Method m : {Method::FE, Method::SE, Method::Heun, Method::RK2, Method::CF4}) {
    LieState s{Pose(), random_constrained(rng)};
    for (int i = 0; i < 500; ++i) s = step(s, random_input(rng), 0.02, m, lie);
    EXPECT_LT(std::abs(lie.constraint() * s.twist), 1e-9) << to_string(m);
  }
  for (Method m : {Method::FE, Method::SE, Method::Heun, Method::RK2, Method::RK4}) {
    const SSState s = integrate(to_ss_state({Pose(), Twist(0.4, 0, 0.5)}), {1.0, 0.005}, 1.0, 1e-3, m, ss);
    // The SS constraint is preserved to integration order only.
    EXPECT_LT(std::abs(SSModel::constraint(s.q) * s.dq), 1e-2) << to_string(m);
  }
}

TEST(Integrate, StepCountCoversHorizon) {
  EXPECT_EQ(step_count(1.0, 0.1), 10);
  EXPECT_EQ(step_count(0.5, 1.0 / 60.0), 30);
  EXPECT_EQ(step_count(1.0, 0.3), 4);
}

TEST(Reference, ConstantTwistIsExponential) {
  const LieModel lie = LieModel::unicycle(kInertia);
  const LieState s{Pose(), Twist(0.5, 0, 0.8)};
  const LieState end = reference_trajectory(s, {}, 1.0, lie);
  EXPECT_LT(pose_distance(end.pose, exp(s.twist)), 1e-12);
}

TEST(Reference, MatchesQuadratureOracle) {
  const LieModel lie = LieModel::unicycle(kInertia);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const double v0 = 0.1 + 0.4 * unit(rng), w0 = 0.5 * unit(rng);
    const ControlInput u{2.8 * 0.5 * unit(rng), 0.007 * 2.0 * unit(rng)};
    const LieState end = reference_trajectory({Pose(), Twist(v0, 0, w0)}, u, 1.0, lie);
    const Eigen::Vector3d q = oracle::unicycle_quadrature(v0, w0, u.fx, u.tz, 2.8, 0.007, 1.0);
    EXPECT_LT(pose_distance(end.pose, Pose(q(0), q(1), q(2))), 1e-10);
    // Halving the oracle step changes nothing at this level.
    const LieState half = reference_trajectory({Pose(), Twist(v0, 0, w0)}, u, 1.0, lie, kReferenceStep / 2);
    EXPECT_LT(pose_distance(end.pose, half.pose), 1e-10);
    const LieState cf4 = integrate({Pose(), Twist(v0, 0, w0)}, u, 1.0, 1e-3, Method::CF4, lie);
    EXPECT_LT(pose_distance(end.pose, cf4.pose), 1e-9);
  }
}

TEST(Equivalence, StateSpaceAndLieTrajectoriesAgree) {
  const LieModel lie = LieModel::unicycle(kInertia);
  const SSModel ss(kInertia);
  const LieState s0{Pose(), Twist(0.3, 0, 0.25)};
  const ControlInput u{0.7, 0.007};
  const Pose ref = reference_trajectory(s0, u, 1.0, lie).pose;
  const struct {
    Method ss, lie;
    double dt, tol;
  } pairs[] = {{Method::FE, Method::FE, 1e-3, 5e-3},
               {Method::Heun, Method::Heun, 1e-3, 1e-5},
               {Method::RK4, Method::CF4, 1e-2, 1e-8}};
  for (const auto& p : pairs) {
    const Pose a = to_lie_state(integrate(to_ss_state(s0), u, 1.0, p.dt, p.ss, ss)).pose;
    const Pose b = integrate(s0, u, 1.0, p.dt, p.lie, lie).pose;
    EXPECT_LT(pose_distance(a, b), p.tol);
    EXPECT_LT(pose_distance(a, ref), p.tol);
  }
}

TEST(Energy, CoastingKeepsKineticEnergy) {
  const LieModel lie = LieModel::unicycle(kInertia);
  for (Method m : {Method::FE, Method::SE, Method::Heun, Method::RK2, Method::CF4}) {
    LieState s{Pose(), Twist(0.5, 0, 1.2)};
    const double e0 = kinetic_energy(s.twist, lie);
    for (int i = 0; i < 1000; ++i) s = step(s, {}, 0.01, m, lie);
    EXPECT_LE(kinetic_energy(s.twist, lie), e0 * (1 + 1e-12)) << to_string(m);
    EXPECT_NEAR(kinetic_energy(s.twist, lie), e0, 1e-12);
  }
}

TEST(Convergence, ForwardEulerIsFirstOrder) {
  const LieModel lie = LieModel::unicycle(kInertia);
  const LieState s0{Pose(), Twist(0.3, 0, 0.25)};
  const ControlInput u{0.7, 0.007};
  const Pose ref = reference_trajectory(s0, u, 1.0, lie).pose;
  const double e1 = pose_distance(integrate(s0, u, 1.0, 0.01, Method::FE, lie).pose, ref);
  const double e2 = pose_distance(integrate(s0, u, 1.0, 0.001, Method::FE, lie).pose, ref);
  EXPECT_NEAR(std::log10(e1 / e2), 1.0, 0.1);
}
