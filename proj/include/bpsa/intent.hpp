#pragma once

#include <string>
#include <vector>

#include "bpsa/arm.hpp"

namespace bpsa {

struct BeliefState {
  std::vector<std::string> candidates;  // task region ids
  std::vector<Vec2> centers;            // x_a per candidate, m
  Vec probs;
  double beta1 = 1.0;  // 1/(N*m)
  int updates = 0;

  static BeliefState uniform(std::vector<std::string> candidates, std::vector<Vec2> centers,
                             double beta1);
  int index_of(const std::string& id) const;  // -1 when absent
};

// Integral of exp(beta1 <w, x_a - x_t>) over |w| <= w_bar, by Gauss-Legendre in
// radius times the periodic trapezoid rule in angle.
double partition(const Vec2& x_t, const Vec2& x_a, double beta1, double w_bar, int radial = 64,
                 int angular = 128);

// Forces above w_bar are clamped to the disc boundary first.
double likelihood(const Vec2& w, const Vec2& x_t, const Vec2& x_a, double beta1, double w_bar);

// prior .* lik, renormalised. Throws DegenerateBelief on zero mass.
Vec posterior(const Vec& prior, const Vec& lik);

// Skips forces with |w| below `threshold` (returned unchanged).
BeliefState update_belief(const BeliefState& b, const Vec2& w, const Vec2& x_t, double w_bar,
                          double threshold = 0.05);

// Argmax with hysteresis: keeps `current` unless the leader clears it by more
// than switch_margin. Ties go to the lowest index.
int estimate_target(const BeliefState& b, int current, double switch_margin = 0.1);

}  // namespace bpsa
