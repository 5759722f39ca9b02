#include "bpsa/arm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bpsa/error.hpp"

namespace bpsa {

double RobotModel::reach() const {
  return std::accumulate(link_lengths.begin(), link_lengths.end(), 0.0);
}

void RobotModel::validate() const {
  const auto count = link_lengths.size();
  if (count == 0) throw Error(ErrorCode::kValidationError, "robot has no links");
  if (point_masses.size() != count || torque_limits.size() != count) {
    throw Error(ErrorCode::kValidationError, "robot parameter lists differ in length");
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!(link_lengths[i] > 0.0) || !(point_masses[i] > 0.0) || !(torque_limits[i] > 0.0)) {
      throw Error(ErrorCode::kValidationError,
                  "robot parameters must be strictly positive (joint " + std::to_string(i) + ")");
    }
  }
  if (!(singular_threshold > 0.0)) {
    throw Error(ErrorCode::kValidationError, "singular_threshold must be positive");
  }
}

RobotModel RobotModel::reference() {
  RobotModel m;
  m.link_lengths = {0.75, 0.75};
  m.point_masses = {2.5, 2.5};
  m.torque_limits = {25.0, 25.0};
  return m;
}

namespace {

// Absolute link angles phi_j = q_1 + ... + q_j.
Vec link_angles(const Vec& q) {
  Vec phi(q.size());
  double acc = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    acc += q[j];
    phi[j] = acc;
  }
  return phi;
}

// Jacobian of the distal point of link k.
Mat point_jacobian(const RobotModel& model, const Vec& phi, int k) {
  const int n = model.n();
  Mat Jk = Mat::Zero(2, n);
  for (int i = 0; i <= k; ++i) {
    for (int j = i; j <= k; ++j) {
      Jk(0, i) -= model.link_lengths[j] * std::sin(phi[j]);
      Jk(1, i) += model.link_lengths[j] * std::cos(phi[j]);
    }
  }
  return Jk;
}

Mat inertia_general(const RobotModel& model, const Vec& q) {
  const Vec phi = link_angles(q);
  Mat M = Mat::Zero(model.n(), model.n());
  for (int k = 0; k < model.n(); ++k) {
    const Mat Jk = point_jacobian(model, phi, k);
    M += model.point_masses[k] * Jk.transpose() * Jk;
  }
  return M;
}

// Christoffel symbols of the first kind with dM/dq by central differences.
Mat coriolis_general(const RobotModel& model, const Vec& q, const Vec& qd) {
  const int n = model.n();
  constexpr double h = 1e-6;
  std::vector<Mat> dM(n);
  for (int k = 0; k < n; ++k) {
    Vec qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    dM[k] = (inertia_general(model, qp) - inertia_general(model, qm)) / (2.0 * h);
  }
  Mat C = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        C(i, j) += 0.5 * (dM[k](i, j) + dM[j](i, k) - dM[i](j, k)) * qd[k];
      }
    }
  }
  return C;
}

}  // namespace

Vec2 forward_kinematics(const RobotModel& model, const Vec& q) {
  const Vec phi = link_angles(q);
  Vec2 x = model.base_position;
  for (int j = 0; j < model.n(); ++j) {
    x.x() += model.link_lengths[j] * std::cos(phi[j]);
    x.y() += model.link_lengths[j] * std::sin(phi[j]);
  }
  return x;
}

Vec inverse_kinematics(const RobotModel& model, const Vec2& x, ElbowBranch branch) {
  if (model.n() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "closed-form inverse kinematics needs two links");
  }
  const double l1 = model.link_lengths[0];
  const double l2 = model.link_lengths[1];
  const Vec2 r = x - model.base_position;
  const double dist = r.norm();
  constexpr double kTol = 1e-12;
  if (dist > l1 + l2 + kTol || dist < std::abs(l1 - l2) - kTol) {
    throw Error(ErrorCode::kOutOfReach, "target at distance " + std::to_string(dist));
  }
  const double c2 = std::clamp((r.squaredNorm() - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  double s2 = std::sqrt(std::max(0.0, 1.0 - c2 * c2));
  if (branch == ElbowBranch::kUp) s2 = -s2;
  if (l1 * l2 * std::abs(s2) < model.singular_threshold) {
    throw Error(ErrorCode::kNearSingular, "inverse kinematics solution near singular");
  }
  Vec q(2);
  q[1] = std::atan2(s2, c2);
  q[0] = std::atan2(r.y(), r.x()) - std::atan2(l2 * s2, l1 + l2 * c2);
  return q;
}

Mat jacobian(const RobotModel& model, const Vec& q) {
  return point_jacobian(model, link_angles(q), model.n() - 1);
}

Mat inertia(const RobotModel& model, const Vec& q) {
  if (model.n() != 2) return inertia_general(model, q);
  const double l1 = model.link_lengths[0], l2 = model.link_lengths[1];
  const double m1 = model.point_masses[0], m2 = model.point_masses[1];
  const double c2 = std::cos(q[1]);
  Mat M(2, 2);
  M(0, 0) = (m1 + m2) * l1 * l1 + m2 * l2 * l2 + 2.0 * m2 * l1 * l2 * c2;
  M(0, 1) = m2 * l2 * l2 + m2 * l1 * l2 * c2;
  M(1, 0) = M(0, 1);
  M(1, 1) = m2 * l2 * l2;
  return M;
}

Mat coriolis(const RobotModel& model, const Vec& q, const Vec& qd) {
  if (model.n() != 2) return coriolis_general(model, q, qd);
  const double h = -model.point_masses[1] * model.link_lengths[0] * model.link_lengths[1] *
                   std::sin(q[1]);
  Mat C(2, 2);
  C << h * qd[1], h * (qd[0] + qd[1]),
      -h * qd[0], 0.0;
  return C;
}

double manipulability(const RobotModel& model, const Vec& q) {
  const Mat J = jacobian(model, q);
  if (J.cols() == 2) return std::abs(J.determinant());
  return std::sqrt(std::max(0.0, (J * J.transpose()).determinant()));
}

bool is_singular(const RobotModel& model, const Vec& q) {
  return manipulability(model, q) < model.singular_threshold;
}

LagrangianTerms lagrangian_terms(const RobotModel& model, const JointState& s) {
  return {inertia(model, s.q), coriolis(model, s.q, s.qd), jacobian(model, s.q)};
}

Vec forward_dynamics(const RobotModel& model, const JointState& s, const Vec& u, const Vec2& w) {
  const LagrangianTerms t = lagrangian_terms(model, s);
  const Vec rhs = u + t.J.transpose() * w - t.C * s.qd;
  return t.M.ldlt().solve(rhs);
}

double kinetic_energy(const RobotModel& model, const JointState& s) {
  return 0.5 * s.qd.dot(inertia(model, s.q) * s.qd);
}

LinearizedPlant linearize(const RobotModel& model, const Vec& q_e) {
  if (is_singular(model, q_e)) {
    throw Error(ErrorCode::kNearSingular, "equilibrium too close to a kinematic singularity");
  }
  const int n = model.n();
  const Mat M_inv = inertia(model, q_e).inverse();
  const Mat J = jacobian(model, q_e);
  // C(q_e, 0) vanishes, so the lower-right block is identically zero.
  const Mat damping = -M_inv * coriolis(model, q_e, Vec::Zero(n));

  LinearizedPlant p;
  p.q_e = q_e;
  p.x_e = forward_kinematics(model, q_e);
  p.A = Mat::Zero(2 * n, 2 * n);
  p.A.topRightCorner(n, n).setIdentity();
  p.A.bottomRightCorner(n, n) = damping;
  p.B_u = Mat::Zero(2 * n, n);
  p.B_u.bottomRows(n) = M_inv;
  p.B_w = Mat::Zero(2 * n, 2);
  p.B_w.bottomRows(n) = M_inv * J.transpose();
  p.C_x = Mat::Zero(2, 2 * n);
  p.C_x.leftCols(n) = J;
  return p;
}

JointState step(const RobotModel& model, const JointState& s, const Vec& u, const Vec2& w,
                double dt) {
  if (!(dt > 0.0 && dt <= 0.01)) {
    throw Error(ErrorCode::kInvalidArgument, "dt must lie in (0, 0.01]");
  }
  auto deriv = [&](const JointState& x) {
    return JointState{x.qd, forward_dynamics(model, x, u, w)};
  };
  auto offset = [](const JointState& x, const JointState& k, double h) {
    return JointState{x.q + h * k.q, x.qd + h * k.qd};
  };
  const JointState k1 = deriv(s);
  const JointState k2 = deriv(offset(s, k1, 0.5 * dt));
  const JointState k3 = deriv(offset(s, k2, 0.5 * dt));
  const JointState k4 = deriv(offset(s, k3, dt));
  JointState out{s.q + dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q),
                 s.qd + dt / 6.0 * (k1.qd + 2.0 * k2.qd + 2.0 * k3.qd + k4.qd)};
  if (!out.q.allFinite() || !out.qd.allFinite()) {
    throw Error(ErrorCode::kNonFiniteState, "integration diverged");
  }
  return out;
}

}  // namespace bpsa
