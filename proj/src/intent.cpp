#include "bpsa/intent.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>

#include "bpsa/error.hpp"

namespace bpsa {

BeliefState BeliefState::uniform(std::vector<std::string> candidates, std::vector<Vec2> centers,
                                 double beta1) {
  if (candidates.empty() || candidates.size() != centers.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one center per candidate required");
  }
  BeliefState b;
  b.probs = Vec::Constant(static_cast<Eigen::Index>(candidates.size()),
                          1.0 / static_cast<double>(candidates.size()));
  b.candidates = std::move(candidates);
  b.centers = std::move(centers);
  b.beta1 = beta1;
  return b;
}

int BeliefState::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] == id) return static_cast<int>(i);
  }
  return -1;
}

namespace {

// Angular integral of exp(k r cos th) over [0, 2pi).
double ring(double kr, int angular) {
  double s = 0.0;
  for (int j = 0; j < angular; ++j) s += std::exp(kr * std::cos(2.0 * M_PI * j / angular));
  return 2.0 * M_PI * s / angular;
}

template <int N>
double radial_gl(double k, double w_bar, int angular) {
  using Rule = boost::math::quadrature::gauss<double, N>;
  const auto& x = Rule::abscissa();
  const auto& wt = Rule::weights();
  const double h = 0.5 * w_bar;
  double s = 0.0;
  // Rule stores nonnegative abscissae; the zero node (odd N) appears once.
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (double sign : {-1.0, 1.0}) {
      if (x[i] == 0.0 && sign < 0.0) continue;
      const double r = h * (1.0 + sign * x[i]);
      s += wt[i] * r * ring(k * r, angular);
    }
  }
  return h * s;
}

}  // namespace

double partition(const Vec2& x_t, const Vec2& x_a, double beta1, double w_bar, int radial,
                 int angular) {
  if (!(w_bar > 0.0) || !(beta1 >= 0.0) || angular < 1) {
    throw Error(ErrorCode::kInvalidScalar, "partition needs w_bar > 0, beta1 >= 0");
  }
  const double k = beta1 * (x_a - x_t).norm();
  // Direction of d does not matter after integrating over angle.
  switch (radial) {
    case 32: return radial_gl<32>(k, w_bar, angular);
    case 64: return radial_gl<64>(k, w_bar, angular);
    case 128: return radial_gl<128>(k, w_bar, angular);
    default: throw Error(ErrorCode::kInvalidArgument, "radial order must be 32, 64 or 128");
  }
}

double likelihood(const Vec2& w, const Vec2& x_t, const Vec2& x_a, double beta1, double w_bar) {
  Vec2 wc = w;
  const double nw = w.norm();
  if (nw > w_bar) wc *= w_bar / nw;
  return std::exp(beta1 * wc.dot(x_a - x_t)) / partition(x_t, x_a, beta1, w_bar);
}

Vec posterior(const Vec& prior, const Vec& lik) {
  Vec p = prior.cwiseProduct(lik);
  const double total = p.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error(ErrorCode::kDegenerateBelief, "posterior mass vanished");
  }
  p /= total;
  return p;
}

BeliefState update_belief(const BeliefState& b, const Vec2& w, const Vec2& x_t, double w_bar,
                          double threshold) {
  if (w.norm() < threshold) return b;
  Vec lik(b.probs.size());
  for (Eigen::Index i = 0; i < lik.size(); ++i) {
    lik[i] = likelihood(w, x_t, b.centers[static_cast<std::size_t>(i)], b.beta1, w_bar);
  }
  BeliefState out = b;
  out.probs = posterior(b.probs, lik);
  ++out.updates;
  return out;
}

int estimate_target(const BeliefState& b, int current, double switch_margin) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < b.probs.size(); ++i) {
    if (b.probs[i] > b.probs[best]) best = i;
  }
  if (current >= 0 && current < b.probs.size() &&
      b.probs[best] <= b.probs[current] + switch_margin) {
    return current;
  }
  return static_cast<int>(best);
}

}  // namespace bpsa
