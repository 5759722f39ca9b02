#pragma once

#include <cstdint>
#include <vector>

#include "bpsa/arm.hpp"

namespace bpsa {

// Joint-space box about a rest equilibrium over which an LDI is valid.
struct StateBox {
  Vec q_e;
  Vec dq_max;   // rad
  Vec dqd_max;  // rad/s

  bool contains(const JointState& s, double tol = 1e-12) const;
  void validate() const;
};

// value in { nominal + left * Delta * right : ||Delta|| <= 1 } with
// left = sigma * left_weight and right = right_weight.
struct NormBoundTerm {
  Mat nominal;
  Mat left_weight;
  Mat right_weight;
  double sigma = 0.0;

  Mat left() const { return sigma * left_weight; }
  const Mat& right() const { return right_weight; }

  // Spectral norm of left_weight^-1 (value - nominal) right_weight^-1.
  double residual_norm(const Mat& value) const;
  bool includes(const Mat& value, double tol = 1e-12) const;
};

// Norm-bound inclusion of the four state-dependent terms of the arm dynamics.
struct LDIModel {
  NormBoundTerm damping;      // -M^-1 C
  NormBoundTerm force_gain;   // M^-1 J^T
  NormBoundTerm torque_gain;  // M^-1
  NormBoundTerm jacobian;     // J
  StateBox box;
  double margin = 0.1;
};

// Exact values of the four LDI terms at one state.
struct ExactTerms {
  Mat damping;
  Mat force_gain;
  Mat torque_gain;
  Mat jacobian;
};

ExactTerms exact_terms(const RobotModel& model, const JointState& s);

// Center first, then the 4n face centers, then seeded uniform draws.
std::vector<JointState> sample_domain(const StateBox& box, int count, std::uint64_t seed);

// Parallel over samples; max-reduction makes the result independent of
// thread count and schedule.
LDIModel fit_norm_bound(const RobotModel& model, const StateBox& box,
                        const std::vector<JointState>& samples, double margin);
LDIModel fit_norm_bound_serial(const RobotModel& model, const StateBox& box,
                               const std::vector<JointState>& samples, double margin);

// Throws OutsideBox when s is not inside ldi.box.
bool inclusion_check(const LDIModel& ldi, const RobotModel& model, const JointState& s);

// Indices of samples that fail inclusion_check.
std::vector<std::size_t> inclusion_violations(const LDIModel& ldi, const RobotModel& model,
                                              const std::vector<JointState>& samples);
std::vector<std::size_t> inclusion_violations_serial(const LDIModel& ldi, const RobotModel& model,
                                                     const std::vector<JointState>& samples);

}  // namespace bpsa
