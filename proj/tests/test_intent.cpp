#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bpsa/config.hpp"
#include "bpsa/error.hpp"
#include "bpsa/intent.hpp"

using namespace bpsa;

namespace {

// Closed form of the disc integral: 2 pi w_bar I1(k w_bar) / k.
double bessel_oracle(double k, double w_bar) {
  if (k == 0.0) return M_PI * w_bar * w_bar;
  return 2.0 * M_PI * w_bar * std::cyl_bessel_i(1.0, k * w_bar) / k;
}

ScenarioConfig reference() { return load_config(BPSA_SOURCE_DIR "/scenarios/reference.json"); }

BeliefState reference_belief(const ScenarioConfig& cfg) {
  std::vector<Vec2> centers;
  for (const std::string& id : cfg.intent.candidates) centers.push_back(cfg.plan.region(id).center);
  return BeliefState::uniform(cfg.intent.candidates, centers, cfg.intent.beta1);
}

}  // namespace

TEST(Partition, ZeroDistanceIsDiscArea) {
  EXPECT_NEAR(partition(Vec2(0.3, 0.2), Vec2(0.3, 0.2), 1.0, 1.0), M_PI, 1e-12);
  EXPECT_NEAR(partition(Vec2(0, 0), Vec2(1, 0), 0.0, 2.0), 4.0 * M_PI, 1e-12);
}

TEST(Partition, MatchesBessel) {
  const double v = partition(Vec2(0, 0), Vec2(1, 0), 1.0, 1.0);
  EXPECT_NEAR(v / bessel_oracle(1.0, 1.0) - 1.0, 0.0, 1e-8);
}

TEST(Partition, BesselGrid) {
  for (double beta : {0.0, 0.1, 0.5, 1.0, 2.0, 4.0}) {
    for (double d : {0.0, 0.05, 0.3, 1.0, 1.5, 2.5}) {
      for (double w_bar : {0.25, 1.0, 2.0}) {
        const Vec2 x_t(0.1, -0.2);
        const Vec2 x_a = x_t + d * Vec2(std::cos(0.7), std::sin(0.7));
        const double v = partition(x_t, x_a, beta, w_bar);
        const double o = bessel_oracle(beta * d, w_bar);
        EXPECT_LE(std::abs(v / o - 1.0), 1e-8) << beta << " " << d << " " << w_bar;
      }
    }
  }
}

TEST(Partition, DoubledResolutionAgrees) {
  for (double k : {0.2, 1.0, 3.0, 8.0}) {
    const double a = partition(Vec2(0, 0), Vec2(k, 0), 1.0, 1.0, 64, 128);
    const double b = partition(Vec2(0, 0), Vec2(k, 0), 1.0, 1.0, 128, 256);
    EXPECT_LE(std::abs(a / b - 1.0), 1e-8) << k;
  }
}

TEST(Partition, JensenBound) {
  for (double beta : {0.0, 0.5, 1.0, 3.0}) {
    for (double d : {0.0, 0.2, 1.0}) {
      for (double w_bar : {0.5, 1.0, 2.0}) {
        const double v = partition(Vec2(0, 0), Vec2(0, d), beta, w_bar);
        const double area = M_PI * w_bar * w_bar;
        if (beta * d == 0.0) {
          EXPECT_NEAR(v, area, 1e-12 * area);
        } else {
          EXPECT_GT(v, area);
        }
      }
    }
  }
}

TEST(Partition, RejectsBadScalars) {
  EXPECT_THROW(partition(Vec2(0, 0), Vec2(1, 0), 1.0, 0.0), Error);
  EXPECT_THROW(partition(Vec2(0, 0), Vec2(1, 0), -1.0, 1.0), Error);
}

TEST(Likelihood, ZeroForceGivesNormaliser) {
  const Vec2 x_t(0, 0), x_a(0.6, 0.8);
  EXPECT_DOUBLE_EQ(likelihood(Vec2(0, 0), x_t, x_a, 1.0, 1.0), 1.0 / partition(x_t, x_a, 1.0, 1.0));
}

TEST(Likelihood, UniformAtTarget) {
  for (double th = 0.0; th < 6.28; th += 0.5) {
    EXPECT_NEAR(likelihood(0.7 * Vec2(std::cos(th), std::sin(th)), Vec2(1, 1), Vec2(1, 1), 1.0, 1.0),
                1.0 / M_PI, 1e-12);
  }
}

TEST(Likelihood, IncreasesTowardTarget) {
  const Vec2 x_t(0, 0), x_a(1, 0);
  double prev = -1.0;
  // Angle from pi down to 0 turns the force toward d.
  for (int k = 0; k <= 1000; ++k) {
    const double th = M_PI * (1.0 - k / 1000.0);
    const double v = likelihood(Vec2(std::cos(th), std::sin(th)), x_t, x_a, 1.0, 1.0);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(Likelihood, IntegratesToOne) {
  // Midpoint polar grid, independent of the library quadrature.
  const Vec2 x_t(0.2, 0.1), x_a(-0.5, 0.9);
  const double w_bar = 1.5;
  const int nr = 200, na = 64;
  double s = 0.0;
  for (int i = 0; i < nr; ++i) {
    const double r = w_bar * (i + 0.5) / nr;
    for (int j = 0; j < na; ++j) {
      const double th = 2.0 * M_PI * (j + 0.5) / na;
      s += r * likelihood(r * Vec2(std::cos(th), std::sin(th)), x_t, x_a, 1.0, w_bar);
    }
  }
  s *= (w_bar / nr) * (2.0 * M_PI / na);
  EXPECT_NEAR(s, 1.0, 1e-4);
}

TEST(Likelihood, ClampsLargeForces) {
  const Vec2 x_t(0, 0), x_a(1, 1);
  EXPECT_DOUBLE_EQ(likelihood(Vec2(3, 0), x_t, x_a, 1.0, 1.0),
                   likelihood(Vec2(1, 0), x_t, x_a, 1.0, 1.0));
}

TEST(Belief, BayesArithmetic) {
  Vec prior(2), lik(2);
  prior << 0.5, 0.5;
  lik << 2.0, 1.0;
  const Vec p = posterior(prior, lik);
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
  EXPECT_THROW(posterior(prior, Vec::Zero(2)), Error);
}

TEST(Belief, LikelihoodScaleInvariance) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int t = 0; t < 100; ++t) {
    Vec prior(3), lik(3);
    for (int i = 0; i < 3; ++i) {
      prior[i] = u(rng);
      lik[i] = u(rng);
    }
    prior /= prior.sum();
    const Vec a = posterior(prior, lik);
    for (double c : {1e-6, 0.5, 7.0, 1e6}) {
      EXPECT_LT((posterior(prior, c * lik) - a).cwiseAbs().maxCoeff(), 1e-15);
    }
  }
}

TEST(Belief, OrthogonalForceLeavesSymmetricBeliefUnchanged) {
  const BeliefState b = BeliefState::uniform({"l", "r"}, {Vec2(-1, 0), Vec2(1, 0)}, 1.0);
  const BeliefState c = update_belief(b, Vec2(0, 1), Vec2(0, 0), 1.0);
  EXPECT_EQ(c.updates, 1);
  EXPECT_LT((c.probs - b.probs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Belief, BelowThresholdSkipped) {
  const BeliefState b = BeliefState::uniform({"l", "r"}, {Vec2(-1, 0), Vec2(1, 0)}, 1.0);
  const BeliefState c = update_belief(b, Vec2(0.049, 0), Vec2(0, 0), 1.0, 0.05);
  EXPECT_EQ(c.updates, 0);
  EXPECT_EQ(c.probs, b.probs);
  EXPECT_EQ(update_belief(b, Vec2(0.05, 0), Vec2(0, 0), 1.0, 0.05).updates, 1);
}

TEST(Belief, NormalisationUnderLongSequences) {
  const ScenarioConfig cfg = reference();
  BeliefState b = reference_belief(cfg);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const Vec2 w(u(rng), u(rng));
    const Vec2 x(u(rng), 0.5 + u(rng));
    b = update_belief(b, 1.2 * w, x, cfg.plan.bounds.w_bar);
    EXPECT_NEAR(b.probs.sum(), 1.0, 1e-12);
    EXPECT_GE(b.probs.minCoeff(), 0.0);
  }
}

TEST(Belief, ScriptedForceFlipsArgmax) {
  const ScenarioConfig cfg = reference();
  const BeliefState b0 = reference_belief(cfg);
  const int n = static_cast<int>(b0.candidates.size());
  Vec2 x_t = Vec2::Zero();
  for (const Vec2& c : b0.centers) x_t += c / n;
  for (int to = 0; to < n; ++to) {
    const Vec2 w = (b0.centers[to] - x_t).normalized();
    for (int start = 0; start < n; ++start) {
      if (start == to) continue;
      BeliefState b = b0;
      int current = start;
      int flips_at = -1;
      for (int k = 1; k <= 20 && flips_at < 0; ++k) {
        b = update_belief(b, w, x_t, cfg.plan.bounds.w_bar, cfg.intent.threshold);
        current = estimate_target(b, current, cfg.intent.switch_margin);
        if (current == to) flips_at = k;
      }
      EXPECT_GT(flips_at, 0) << b0.candidates[to];
    }
  }
}

TEST(Belief, ArgmaxFollowsInnerProductOnSymmetricLayout) {
  std::vector<std::string> ids;
  std::vector<Vec2> centers;
  const Vec2 x_t(0.3, -0.4);
  for (int i = 0; i < 5; ++i) {
    const double th = 2.0 * M_PI * i / 5 + 0.1;
    ids.push_back("r" + std::to_string(i));
    centers.push_back(x_t + 0.8 * Vec2(std::cos(th), std::sin(th)));
  }
  const BeliefState b0 = BeliefState::uniform(ids, centers, 1.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  for (int t = 0; t < 500; ++t) {
    const double th = u(rng);
    const Vec2 w(std::cos(th), std::sin(th));
    const BeliefState b = update_belief(b0, w, x_t, 1.0);
    int best = 0;
    for (int i = 1; i < 5; ++i) {
      if (w.dot(centers[i] - x_t) > w.dot(centers[best] - x_t)) best = i;
    }
    EXPECT_EQ(estimate_target(b, -1, 0.0), best);
    // Posterior order equals inner-product order.
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        if (w.dot(centers[i] - x_t) > w.dot(centers[j] - x_t) + 1e-12) {
          EXPECT_GT(b.probs[i], b.probs[j]);
        }
      }
    }
  }
}

TEST(EstimateTarget, Hysteresis) {
  BeliefState b = BeliefState::uniform({"a", "b", "c"}, {Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)}, 1.0);
  EXPECT_EQ(estimate_target(b, 2, 0.1), 2);
  b.probs << 0.1, 0.8, 0.1;
  EXPECT_EQ(estimate_target(b, 0, 0.1), 1);
  b.probs << 0.34, 0.33, 0.33;
  EXPECT_EQ(estimate_target(b, 1, 0.1), 1);
  // Exact tie without a current target goes to the lowest index.
  b.probs << 0.4, 0.4, 0.2;
  EXPECT_EQ(estimate_target(b, -1, 0.0), 0);
}
