#include <gtest/gtest.h>

#include <numbers>

#include "bpsa/error.hpp"
#include "bpsa/ldi.hpp"

using namespace bpsa;

namespace {

constexpr double kPi = std::numbers::pi;

StateBox box_about(double q1, double q2, double dq, double dqd) {
  StateBox b;
  b.q_e = (Vec(2) << q1, q2).finished();
  b.dq_max = Vec::Constant(2, dq);
  b.dqd_max = Vec::Constant(2, dqd);
  return b;
}

// sqrt of the largest eigenvalue of X^T X.
double norm_oracle(const Mat& X) {
  return std::sqrt(Eigen::SelfAdjointEigenSolver<Mat>(X.transpose() * X).eigenvalues().maxCoeff());
}

double residual_oracle(const NormBoundTerm& t, const Mat& value) {
  return norm_oracle(t.left_weight.inverse() * (value - t.nominal) * t.right_weight.inverse());
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no bpsa::Error thrown";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(SampleDomain, Examples) {
  const StateBox b = box_about(0.2, kPi / 2, 0.3, 1.0);
  const auto one = sample_domain(b, 1, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].q, b.q_e);
  EXPECT_EQ(one[0].qd, Vec::Zero(2));

  const auto a = sample_domain(b, 500, 42), c = sample_domain(b, 500, 42);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].q, c[k].q);
    EXPECT_EQ(a[k].qd, c[k].qd);
  }

  const auto many = sample_domain(b, 10000, 3);
  ASSERT_EQ(many.size(), 10000u);
  for (const auto& s : many) {
    for (int i = 0; i < 2; ++i) {
      ASSERT_LE(std::abs(s.q[i] - b.q_e[i]), b.dq_max[i] + 1e-15);
      ASSERT_LE(std::abs(s.qd[i]), b.dqd_max[i]);
    }
  }
}

TEST(SampleDomain, FaceCenters) {
  const StateBox b = box_about(0.2, kPi / 2, 0.3, 1.0);
  const auto s = sample_domain(b, 9, 0);
  // Each face center differs from the center in exactly one coordinate.
  for (std::size_t k = 1; k < 9; ++k) {
    Vec z(4);
    z << s[k].q - b.q_e, s[k].qd;
    int nonzero = 0;
    for (int i = 0; i < 4; ++i) nonzero += z[i] != 0.0;
    EXPECT_EQ(nonzero, 1);
    EXPECT_TRUE(std::abs(z.cwiseAbs().maxCoeff() - 0.3) < 1e-15 ||
                std::abs(z.cwiseAbs().maxCoeff() - 1.0) < 1e-15);
  }
}

TEST(FitNormBound, CenterOnly) {
  const RobotModel m = RobotModel::reference();
  const StateBox b = box_about(0.2, kPi / 2, 0.3, 1.0);
  const LDIModel ldi = fit_norm_bound(m, b, sample_domain(b, 1, 0), 0.1);
  EXPECT_EQ(ldi.damping.sigma, 0.0);
  EXPECT_EQ(ldi.force_gain.sigma, 0.0);
  EXPECT_EQ(ldi.torque_gain.sigma, 0.0);
  EXPECT_EQ(ldi.jacobian.sigma, 0.0);
  EXPECT_EQ(ldi.damping.left().norm(), 0.0);
  // Nominal equals the exact terms at the center.
  const ExactTerms c = exact_terms(m, JointState::at_rest(b.q_e));
  EXPECT_EQ(ldi.force_gain.nominal, c.force_gain);
  EXPECT_EQ(ldi.jacobian.nominal, c.jacobian);
}

TEST(FitNormBound, MarginOverBruteForceResiduals) {
  const RobotModel m = RobotModel::reference();
  const StateBox b = box_about(-0.4, 1.2, 0.25, 1.0);
  const auto samples = sample_domain(b, 1500, 8);
  const LDIModel ldi = fit_norm_bound(m, b, samples, 0.1);
  double w[4] = {0, 0, 0, 0};
  for (const auto& s : samples) {
    const ExactTerms t = exact_terms(m, s);
    w[0] = std::max(w[0], residual_oracle(ldi.damping, t.damping));
    w[1] = std::max(w[1], residual_oracle(ldi.force_gain, t.force_gain));
    w[2] = std::max(w[2], residual_oracle(ldi.torque_gain, t.torque_gain));
    w[3] = std::max(w[3], residual_oracle(ldi.jacobian, t.jacobian));
  }
  EXPECT_GE(ldi.damping.sigma, 1.1 * w[0] * (1 - 1e-12));
  EXPECT_GE(ldi.force_gain.sigma, 1.1 * w[1] * (1 - 1e-12));
  EXPECT_GE(ldi.torque_gain.sigma, 1.1 * w[2] * (1 - 1e-12));
  EXPECT_GE(ldi.jacobian.sigma, 1.1 * w[3] * (1 - 1e-12));
  EXPECT_NEAR(ldi.damping.sigma, 1.1 * w[0], 1e-9 * (1 + w[0]));
  EXPECT_NEAR(ldi.jacobian.sigma, 1.1 * w[3], 1e-9 * (1 + w[3]));
  for (const auto& s : samples) ASSERT_TRUE(inclusion_check(ldi, m, s));
}

TEST(FitNormBound, FreshSamplesIncluded) {
  const RobotModel m = RobotModel::reference();
  const StateBox b = box_about(0.0, kPi / 2, 0.3, 1.0);
  const LDIModel ldi = fit_norm_bound(m, b, sample_domain(b, 2000, 1), 0.1);
  const auto fresh = sample_domain(b, 100000, 99);
  EXPECT_TRUE(inclusion_violations(ldi, m, fresh).empty());
}

TEST(FitNormBound, SoundnessTwoStage) {
  const RobotModel m = RobotModel::reference();
  const StateBox b = box_about(0.7, 1.0, 0.35, 1.2);
  // Small margin and few samples so that the refit stage has something to do.
  auto fit_set = sample_domain(b, 200, 5);
  const LDIModel ldi = fit_norm_bound(m, b, fit_set, 0.1);
  const auto fresh = sample_domain(b, 100000, 6);
  const auto bad = inclusion_violations(ldi, m, fresh);
  EXPECT_LE(static_cast<double>(bad.size()), 0.001 * fresh.size());
  for (auto k : bad) fit_set.push_back(fresh[k]);
  const LDIModel refit = fit_norm_bound(m, b, fit_set, 0.1);
  EXPECT_TRUE(inclusion_violations(refit, m, fresh).empty());
}

TEST(FitNormBound, MonotoneInBox) {
  const RobotModel m = RobotModel::reference();
  const StateBox small = box_about(0.1, 1.4, 0.1, 0.4);
  const StateBox large = box_about(0.1, 1.4, 0.3, 1.0);
  const auto s_small = sample_domain(small, 800, 2);
  auto s_large = sample_domain(large, 800, 2);
  // Nested boxes evaluated on nested sample sets.
  s_large.insert(s_large.end(), s_small.begin(), s_small.end());
  const LDIModel a = fit_norm_bound(m, small, s_small, 0.1);
  const LDIModel c = fit_norm_bound(m, large, s_large, 0.1);
  EXPECT_GE(c.damping.sigma, a.damping.sigma);
  EXPECT_GE(c.force_gain.sigma, a.force_gain.sigma);
  EXPECT_GE(c.torque_gain.sigma, a.torque_gain.sigma);
  EXPECT_GE(c.jacobian.sigma, a.jacobian.sigma);
}

TEST(FitNormBound, DeterministicAndMatchesSerial) {
  const RobotModel m = RobotModel::reference();
  const StateBox b = box_about(-0.2, 2.0, 0.3, 1.0);
  const auto s = sample_domain(b, 3000, 17);
  const LDIModel p1 = fit_norm_bound(m, b, s, 0.1);
  const LDIModel p2 = fit_norm_bound(m, b, s, 0.1);
  const LDIModel ser = fit_norm_bound_serial(m, b, s, 0.1);
  for (const LDIModel* o : {&p2, &ser}) {
    EXPECT_EQ(p1.damping.sigma, o->damping.sigma);
    EXPECT_EQ(p1.force_gain.sigma, o->force_gain.sigma);
    EXPECT_EQ(p1.torque_gain.sigma, o->torque_gain.sigma);
    EXPECT_EQ(p1.jacobian.sigma, o->jacobian.sigma);
    EXPECT_EQ(p1.damping.nominal, o->damping.nominal);
    EXPECT_EQ(p1.torque_gain.left_weight, o->torque_gain.left_weight);
  }
  const auto fresh = sample_domain(b, 5000, 4);
  EXPECT_EQ(inclusion_violations(p1, m, fresh), inclusion_violations_serial(p1, m, fresh));
}

TEST(FitNormBound, Errors) {
  const RobotModel m = RobotModel::reference();
  const StateBox b = box_about(0.0, 0.2, 0.2, 1.0);  // reaches q2 = 0
  EXPECT_EQ(code_of([&] { fit_norm_bound(m, b, sample_domain(b, 50, 1), 0.1); }),
            ErrorCode::kSingularSample);
  EXPECT_EQ(code_of([&] { fit_norm_bound_serial(m, b, sample_domain(b, 50, 1), 0.1); }),
            ErrorCode::kSingularSample);
  const StateBox ok = box_about(0.0, 1.5, 0.2, 1.0);
  EXPECT_EQ(code_of([&] { fit_norm_bound(m, ok, {}, 0.1); }), ErrorCode::kEmptySampleSet);
  JointState outside = JointState::at_rest(ok.q_e);
  outside.qd[0] = 2.0;
  EXPECT_EQ(code_of([&] { fit_norm_bound(m, ok, {outside}, 0.1); }), ErrorCode::kOutsideBox);
}

TEST(InclusionCheck, Examples) {
  const RobotModel m = RobotModel::reference();
  const StateBox b = box_about(0.0, kPi / 2, 0.3, 1.0);
  const LDIModel ldi = fit_norm_bound(m, b, sample_domain(b, 300, 1), 0.1);
  EXPECT_TRUE(inclusion_check(ldi, m, JointState::at_rest(b.q_e)));
  JointState out = JointState::at_rest(b.q_e);
  out.q[1] += 0.31;
  EXPECT_EQ(code_of([&] { inclusion_check(ldi, m, out); }), ErrorCode::kOutsideBox);
}

TEST(NormBoundTerm, ResidualMatchesOracle) {
  const RobotModel m = RobotModel::reference();
  const StateBox b = box_about(0.3, 1.1, 0.3, 1.0);
  const LDIModel ldi = fit_norm_bound(m, b, sample_domain(b, 100, 1), 0.0);
  for (const auto& s : sample_domain(b, 200, 77)) {
    const ExactTerms t = exact_terms(m, s);
    EXPECT_NEAR(ldi.torque_gain.residual_norm(t.torque_gain),
                residual_oracle(ldi.torque_gain, t.torque_gain), 1e-12);
    EXPECT_NEAR(ldi.force_gain.residual_norm(t.force_gain),
                residual_oracle(ldi.force_gain, t.force_gain), 1e-12);
    EXPECT_NEAR(ldi.damping.residual_norm(t.damping), residual_oracle(ldi.damping, t.damping),
                1e-12);
  }
}

TEST(NormBoundTerm, FactorRepresentsResidual) {
  // value - nominal = left * Delta * right with ||Delta|| <= 1 for included values.
  const RobotModel m = RobotModel::reference();
  const StateBox b = box_about(0.3, 1.1, 0.3, 1.0);
  const LDIModel ldi = fit_norm_bound(m, b, sample_domain(b, 400, 1), 0.1);
  for (const auto& s : sample_domain(b, 100, 5)) {
    const Mat v = exact_terms(m, s).force_gain;
    const Mat delta = ldi.force_gain.left().inverse() * (v - ldi.force_gain.nominal) *
                      ldi.force_gain.right().inverse();
    EXPECT_LE(norm_oracle(delta), 1.0 + 1e-12);
    EXPECT_LT((ldi.force_gain.nominal + ldi.force_gain.left() * delta * ldi.force_gain.right() - v)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
}
