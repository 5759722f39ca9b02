#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bpsa/synth.hpp"

namespace bpsa {

struct GraphEdge {
  int i = -1;          // parent (nearest) vertex
  int j = -1;          // child vertex
  double eps1 = 0.0;   // |[q_j - q_i; 0]|_{Q_i}
  double eps2 = 0.0;   // |[q_i - q_j; 0]|_{Q_j}
  bool admissible = false;
};

// One tree build inside the combined graph.
struct BuildRecord {
  std::string from;  // a0 anchor
  std::string to;    // af anchor (tree root)
  int attempts = 0;  // synthesis attempts spent
  std::vector<int> sequence;  // vertex ids from -> to
};

struct BPGraph {
  std::vector<BarrierPair> vertices;
  std::vector<GraphEdge> edges;
  std::map<std::string, int> anchors;
  std::vector<BuildRecord> builds;
  std::uint64_t rng_seed = 0;

  int add_vertex(BarrierPair bp);
  std::vector<int> neighbours(int v) const;
  int anchor(const std::string& label) const;  // throws Disconnected when absent
};

struct PlannerSettings {
  double eps0 = 0.15;
  double eps1 = 0.80;
  Vec box_dq = Vec::Constant(2, 0.2);  // LDI joint half-widths, rad
  int ldi_samples = 2000;
  double ldi_margin = 0.1;
  std::uint64_t ldi_seed = 1;
  AlphaPolicy alpha;
  SynthOptions synth;
  int cert_samples = 1000;  // per candidate, during growth
  int max_iters = 500;
  double goal_bias = 0.2;
  int sample_attempts = 10000;
};

// Everything the tree planner needs besides the two end regions.
struct PlanContext {
  RobotModel model;
  std::vector<Region> regions;
  ConstraintSet bounds;  // x_bar, qd_bar, u_bar, w_bar; slabs are rebuilt per vertex
  PlannerSettings settings;

  const Region& region(const std::string& id) const;
  std::vector<const Region*> regions_except(const std::vector<std::string>& keep) const;
};

struct Nearest {
  int id = -1;
  double nu = 0.0;
};

// Over all vertices, or over `subset` when given.
Nearest nearest_bp(const Vec& q_rand, const BPGraph& g, const std::vector<int>* subset = nullptr);

// Throws DegenerateDirection when q_rand sits on the equilibrium.
Vec project_to_surface(const Vec& q_rand, const BarrierPair& v, double eps1);

struct Admissibility {
  bool admissible = false;
  double eps1 = 0.0;
  double eps2 = 0.0;
};

Admissibility edge_admissible(const BarrierPair& v1, const BarrierPair& v2, double eps0);

// Smallest gap 1 - |z|_{Q_parent}^2 over `count` points on the child's
// eps0-surface, taken over both directions of the edge.
double edge_containment_margin(const BPGraph& g, const GraphEdge& e, double eps0, int count,
                               std::uint64_t seed);

LDIModel vertex_ldi(const PlanContext& ctx, const Vec& q_e);
ConstraintSet vertex_constraints(const PlanContext& ctx, const Vec2& x_e,
                                 const std::vector<std::string>& avoid);

// Synthesizes and certifies one pair. Throws Infeasible on a failed certificate.
BarrierPair make_pair(const PlanContext& ctx, const Vec& q_e, const Region* contain,
                      const std::vector<std::string>& avoid);

CertReport certify_vertex(const PlanContext& ctx, const BarrierPair& bp, int n_samples,
                          std::uint64_t seed);

// BP-RRT between two task regions, into a fresh graph.
BPGraph build_graph(const PlanContext& ctx, const std::string& a0, const std::string& af,
                    std::uint64_t seed);

// BP-RRT inside g. Anchors that already exist are reused; missing task
// anchors are synthesized with region containment. Returns the sequence a0 -> af.
std::vector<int> grow_between(BPGraph& g, const PlanContext& ctx, const std::string& a0,
                              const std::string& af, std::uint64_t seed);

struct AnchorPlan {
  // a-pair builds; the middle vertex of build k becomes midway[k]
  std::vector<std::pair<std::string, std::string>> task_pairs = {
      {"a2", "a3"}, {"a3", "a1"}, {"a1", "a2"}};
  std::vector<std::string> midway = {"c1", "c2", "c3"};
  std::vector<std::pair<std::string, std::string>> midway_pairs = {
      {"c1", "c2"}, {"c2", "c3"}, {"c3", "c1"}};
};

BPGraph build_scenario(const PlanContext& ctx, std::uint64_t seed, const AnchorPlan& plan = {});

// Breadth-first, ties to the lowest vertex id. Throws Disconnected.
std::vector<int> shortest_path(const BPGraph& g, int from, int to);
std::vector<int> extract_sequence(const BPGraph& g, const std::string& from_anchor,
                                  const std::string& to_anchor);

// Bitwise comparison of every stored field.
bool identical(const BPGraph& a, const BPGraph& b);

}  // namespace bpsa
