#pragma once

#include <Eigen/Dense>
#include <vector>

namespace bpsa {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

// Elbow-down places the elbow clockwise of the base-to-hand line, i.e. q2 > 0.
enum class ElbowBranch { kDown, kUp };

// Planar serial arm with a point mass at the distal end of each link. The arm
// moves in a horizontal plane, so there is no gravity term.
struct RobotModel {
  std::vector<double> link_lengths;   // m
  std::vector<double> point_masses;   // kg
  std::vector<double> torque_limits;  // N*m
  Vec2 base_position = Vec2::Zero();  // m
  double singular_threshold = 0.05;   // minimum |det J| (m^2)

  int n() const { return static_cast<int>(link_lengths.size()); }
  double reach() const;
  void validate() const;

  // 0.75 m links, 2.5 kg distal masses, 25 N*m torque limits.
  static RobotModel reference();
};

struct JointState {
  Vec q;   // rad
  Vec qd;  // rad/s

  static JointState at_rest(const Vec& q) { return {q, Vec::Zero(q.size())}; }
};

struct LagrangianTerms {
  Mat M;  // inertia, kg*m^2
  Mat C;  // Coriolis/centrifugal coefficient matrix
  Mat J;  // 2 x n end-effector Jacobian, m
};

// State-space model about a rest equilibrium, state z = [q - q_e; qd].
struct LinearizedPlant {
  Vec q_e;
  Vec2 x_e;
  Mat A;    // 2n x 2n
  Mat B_u;  // 2n x n
  Mat B_w;  // 2n x 2
  Mat C_x;  // 2 x 2n
};

Vec2 forward_kinematics(const RobotModel& model, const Vec& q);

// Two-link closed form. Throws OutOfReach / NearSingular.
Vec inverse_kinematics(const RobotModel& model, const Vec2& x,
                       ElbowBranch branch = ElbowBranch::kDown);

Mat jacobian(const RobotModel& model, const Vec& q);
Mat inertia(const RobotModel& model, const Vec& q);
Mat coriolis(const RobotModel& model, const Vec& q, const Vec& qd);

// |det J| for two joints, sqrt(det(J J^T)) otherwise.
double manipulability(const RobotModel& model, const Vec& q);
bool is_singular(const RobotModel& model, const Vec& q);

LagrangianTerms lagrangian_terms(const RobotModel& model, const JointState& s);

// qdd = M^-1 (u + J^T w - C qd)
Vec forward_dynamics(const RobotModel& model, const JointState& s, const Vec& u, const Vec2& w);

double kinetic_energy(const RobotModel& model, const JointState& s);

LinearizedPlant linearize(const RobotModel& model, const Vec& q_e);

// One fixed-step RK4 step. dt must lie in (0, 0.01].
JointState step(const RobotModel& model, const JointState& s, const Vec& u, const Vec2& w,
                double dt);

}  // namespace bpsa
