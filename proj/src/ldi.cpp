#include "bpsa/ldi.hpp"

#include <algorithm>
#include <array>
#include <random>

#include "bpsa/error.hpp"

namespace bpsa {

namespace {

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(m).singularValues()(0);
}

Mat inverse_sqrt_spd(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  return eig.operatorInverseSqrt();
}

// Residual norms of the four terms, in declaration order of LDIModel.
std::array<double, 4> residuals(const LDIModel& ldi, const ExactTerms& t) {
  return {ldi.damping.residual_norm(t.damping), ldi.force_gain.residual_norm(t.force_gain),
          ldi.torque_gain.residual_norm(t.torque_gain), ldi.jacobian.residual_norm(t.jacobian)};
}

// Nominal terms and weights at the box center with zero scales.
LDIModel nominal_model(const RobotModel& model, const StateBox& box, double margin) {
  const int n = model.n();
  const ExactTerms c = exact_terms(model, JointState::at_rest(box.q_e));
  const Mat mass_weight = inverse_sqrt_spd(inertia(model, box.q_e));
  const Mat eye_n = Mat::Identity(n, n);
  const Mat eye_2 = Mat::Identity(2, 2);

  LDIModel ldi;
  ldi.damping = {c.damping, mass_weight, eye_n, 0.0};
  ldi.force_gain = {c.force_gain, mass_weight, eye_2, 0.0};
  ldi.torque_gain = {c.torque_gain, mass_weight, mass_weight, 0.0};
  ldi.jacobian = {c.jacobian, eye_2, eye_n, 0.0};
  ldi.box = box;
  ldi.margin = margin;
  return ldi;
}

void check_fit_inputs(const StateBox& box, const std::vector<JointState>& samples, double margin) {
  box.validate();
  if (samples.empty()) throw Error(ErrorCode::kEmptySampleSet, "no samples to fit");
  if (!(margin >= 0.0)) throw Error(ErrorCode::kInvalidScalar, "margin must be non-negative");
  for (const auto& s : samples) {
    if (!box.contains(s)) throw Error(ErrorCode::kOutsideBox, "fitting sample outside box");
  }
}

void apply_scales(LDIModel& ldi, const std::array<double, 4>& worst) {
  const double f = 1.0 + ldi.margin;
  ldi.damping.sigma = f * worst[0];
  ldi.force_gain.sigma = f * worst[1];
  ldi.torque_gain.sigma = f * worst[2];
  ldi.jacobian.sigma = f * worst[3];
}

}  // namespace

bool StateBox::contains(const JointState& s, double tol) const {
  for (Eigen::Index i = 0; i < q_e.size(); ++i) {
    if (std::abs(s.q[i] - q_e[i]) > dq_max[i] + tol) return false;
    if (std::abs(s.qd[i]) > dqd_max[i] + tol) return false;
  }
  return true;
}

void StateBox::validate() const {
  if (dq_max.size() != q_e.size() || dqd_max.size() != q_e.size()) {
    throw Error(ErrorCode::kInvalidArgument, "state box dimensions differ");
  }
  if (!((dq_max.array() > 0.0).all() && (dqd_max.array() > 0.0).all())) {
    throw Error(ErrorCode::kInvalidArgument, "state box half-widths must be positive");
  }
}

double NormBoundTerm::residual_norm(const Mat& value) const {
  const Mat scaled = left_weight.fullPivLu().solve(value - nominal);
  return spectral_norm(right_weight.transpose().fullPivLu().solve(scaled.transpose()).transpose());
}

bool NormBoundTerm::includes(const Mat& value, double tol) const {
  return residual_norm(value) <= sigma + tol;
}

ExactTerms exact_terms(const RobotModel& model, const JointState& s) {
  const LagrangianTerms t = lagrangian_terms(model, s);
  const Mat M_inv = t.M.inverse();
  return {-M_inv * t.C, M_inv * t.J.transpose(), M_inv, t.J};
}

std::vector<JointState> sample_domain(const StateBox& box, int count, std::uint64_t seed) {
  box.validate();
  if (count < 1) throw Error(ErrorCode::kInvalidArgument, "sample count must be positive");
  const Eigen::Index n = box.q_e.size();
  std::vector<JointState> out;
  out.reserve(count);
  out.push_back(JointState::at_rest(box.q_e));

  // Face centers of the 2n-dimensional box.
  for (Eigen::Index d = 0; d < 2 * n && static_cast<int>(out.size()) < count; ++d) {
    for (double sign : {1.0, -1.0}) {
      if (static_cast<int>(out.size()) >= count) break;
      JointState s = JointState::at_rest(box.q_e);
      if (d < n) {
        s.q[d] += sign * box.dq_max[d];
      } else {
        s.qd[d - n] = sign * box.dqd_max[d - n];
      }
      out.push_back(s);
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  while (static_cast<int>(out.size()) < count) {
    JointState s{box.q_e, Vec::Zero(n)};
    for (Eigen::Index i = 0; i < n; ++i) s.q[i] += unit(rng) * box.dq_max[i];
    for (Eigen::Index i = 0; i < n; ++i) s.qd[i] = unit(rng) * box.dqd_max[i];
    out.push_back(s);
  }
  return out;
}

LDIModel fit_norm_bound(const RobotModel& model, const StateBox& box,
                        const std::vector<JointState>& samples, double margin) {
  check_fit_inputs(box, samples, margin);
  LDIModel ldi = nominal_model(model, box, margin);
  const long count = static_cast<long>(samples.size());
  double w0 = 0.0, w1 = 0.0, w2 = 0.0, w3 = 0.0;
  bool singular = false;

#pragma omp parallel for reduction(max : w0, w1, w2, w3) reduction(|| : singular) schedule(static)
  for (long k = 0; k < count; ++k) {
    const JointState& s = samples[k];
    if (is_singular(model, s.q)) {
      singular = true;
      continue;
    }
    const auto r = residuals(ldi, exact_terms(model, s));
    w0 = std::max(w0, r[0]);
    w1 = std::max(w1, r[1]);
    w2 = std::max(w2, r[2]);
    w3 = std::max(w3, r[3]);
  }
  if (singular) throw Error(ErrorCode::kSingularSample, "box contains near-singular samples");
  apply_scales(ldi, {w0, w1, w2, w3});
  return ldi;
}

LDIModel fit_norm_bound_serial(const RobotModel& model, const StateBox& box,
                               const std::vector<JointState>& samples, double margin) {
  check_fit_inputs(box, samples, margin);
  LDIModel ldi = nominal_model(model, box, margin);
  std::array<double, 4> worst{0.0, 0.0, 0.0, 0.0};
  for (const auto& s : samples) {
    if (is_singular(model, s.q)) {
      throw Error(ErrorCode::kSingularSample, "box contains near-singular samples");
    }
    const auto r = residuals(ldi, exact_terms(model, s));
    for (std::size_t i = 0; i < r.size(); ++i) worst[i] = std::max(worst[i], r[i]);
  }
  apply_scales(ldi, worst);
  return ldi;
}

bool inclusion_check(const LDIModel& ldi, const RobotModel& model, const JointState& s) {
  if (!ldi.box.contains(s)) throw Error(ErrorCode::kOutsideBox, "state outside LDI box");
  const ExactTerms t = exact_terms(model, s);
  return ldi.damping.includes(t.damping) && ldi.force_gain.includes(t.force_gain) &&
         ldi.torque_gain.includes(t.torque_gain) && ldi.jacobian.includes(t.jacobian);
}

std::vector<std::size_t> inclusion_violations(const LDIModel& ldi, const RobotModel& model,
                                              const std::vector<JointState>& samples) {
  const long count = static_cast<long>(samples.size());
  std::vector<char> failed(samples.size(), 0);
#pragma omp parallel for schedule(static)
  for (long k = 0; k < count; ++k) {
    const JointState& s = samples[k];
    failed[k] = (!ldi.box.contains(s) || !inclusion_check(ldi, model, s)) ? 1 : 0;
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < failed.size(); ++k) {
    if (failed[k]) out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> inclusion_violations_serial(const LDIModel& ldi, const RobotModel& model,
                                                     const std::vector<JointState>& samples) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const JointState& s = samples[k];
    if (!ldi.box.contains(s) || !inclusion_check(ldi, model, s)) out.push_back(k);
  }
  return out;
}

}  // namespace bpsa
