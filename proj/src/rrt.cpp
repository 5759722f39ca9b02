#include "bpsa/rrt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <limits>
#include <optional>
#include <random>

#include "bpsa/error.hpp"

namespace bpsa {

int BPGraph::add_vertex(BarrierPair bp) {
  bp.id = static_cast<int>(vertices.size());
  vertices.push_back(std::move(bp));
  return vertices.back().id;
}

std::vector<int> BPGraph::neighbours(int v) const {
  std::vector<int> out;
  for (const GraphEdge& e : edges) {
    if (e.i == v) out.push_back(e.j);
    if (e.j == v) out.push_back(e.i);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int BPGraph::anchor(const std::string& label) const {
  const auto it = anchors.find(label);
  if (it == anchors.end()) throw Error(ErrorCode::kDisconnected, "unknown anchor " + label);
  return it->second;
}

const Region& PlanContext::region(const std::string& id) const {
  for (const Region& r : regions) {
    if (r.id == id) return r;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown region " + id);
}

std::vector<const Region*> PlanContext::regions_except(
    const std::vector<std::string>& keep) const {
  std::vector<const Region*> out;
  for (const Region& r : regions) {
    if (std::find(keep.begin(), keep.end(), r.id) == keep.end()) out.push_back(&r);
  }
  return out;
}

Nearest nearest_bp(const Vec& q_rand, const BPGraph& g, const std::vector<int>* subset) {
  std::vector<int> all;
  if (!subset) {
    all.resize(g.vertices.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    subset = &all;
  }
  if (subset->empty()) throw Error(ErrorCode::kEmptyGraph, "no vertices to search");
  Nearest best{-1, std::numeric_limits<double>::infinity()};
  for (int id : *subset) {
    const BarrierPair& v = g.vertices.at(id);
    const double nu = v.joint_norm(q_rand - v.q_e);
    if (nu < best.nu || (nu == best.nu && id < best.id)) best = {id, nu};
  }
  return best;
}

Vec project_to_surface(const Vec& q_rand, const BarrierPair& v, double eps1) {
  const double nu = v.joint_norm(q_rand - v.q_e);
  if (!(nu > 1e-9)) throw Error(ErrorCode::kDegenerateDirection, "sample on the equilibrium");
  return v.q_e + (eps1 / nu) * (q_rand - v.q_e);
}

namespace {

// Largest lambda with Q_a v = lambda Q_b v.
double max_generalized_eig(const Mat& Qa, const Mat& Qb) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Qa, Qb);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

Admissibility edge_admissible(const BarrierPair& v1, const BarrierPair& v2, double eps0) {
  Admissibility a;
  a.eps1 = v1.joint_norm(v2.q_e - v1.q_e);
  a.eps2 = v2.joint_norm(v1.q_e - v2.q_e);
  if (!(a.eps1 < 1.0 && a.eps2 < 1.0)) return a;
  const double c1 = (1.0 - a.eps1) * (1.0 - a.eps1) / (eps0 * eps0);
  const double c2 = (1.0 - a.eps2) * (1.0 - a.eps2) / (eps0 * eps0);
  a.admissible = max_generalized_eig(v2.Q, v1.Q) <= c1 && max_generalized_eig(v1.Q, v2.Q) <= c2;
  return a;
}

double edge_containment_margin(const BPGraph& g, const GraphEdge& e, double eps0, int count,
                               std::uint64_t seed) {
  double margin = std::numeric_limits<double>::infinity();
  auto one_way = [&](const BarrierPair& parent, const BarrierPair& child, std::uint64_t s) {
    const Eigen::LLT<Mat> llt(parent.Q);
    Vec offset = Vec::Zero(parent.Q.rows());
    offset.head(child.q_e.size()) = child.q_e - parent.q_e;
    for (const Vec& z : sample_ellipsoid_surface(child.Q, eps0, count, s)) {
      const Vec p = offset + z;
      margin = std::min(margin, 1.0 - p.dot(llt.solve(p)));
    }
  };
  one_way(g.vertices.at(e.i), g.vertices.at(e.j), seed);
  one_way(g.vertices.at(e.j), g.vertices.at(e.i), seed + 1);
  return margin;
}

LDIModel vertex_ldi(const PlanContext& ctx, const Vec& q_e) {
  const StateBox box{q_e, ctx.settings.box_dq, ctx.bounds.qd_bounds};
  return fit_norm_bound(ctx.model, box,
                        sample_domain(box, ctx.settings.ldi_samples, ctx.settings.ldi_seed),
                        ctx.settings.ldi_margin);
}

ConstraintSet vertex_constraints(const PlanContext& ctx, const Vec2& x_e,
                                 const std::vector<std::string>& avoid) {
  ConstraintSet cs = ctx.bounds;
  cs.slabs.clear();
  for (const std::string& id : avoid) cs.slabs.push_back(build_slab(x_e, ctx.region(id)));
  return cs;
}

namespace {

std::vector<Region> lookup(const PlanContext& ctx, const std::vector<std::string>& ids) {
  std::vector<Region> out;
  for (const std::string& id : ids) out.push_back(ctx.region(id));
  return out;
}

}  // namespace

BarrierPair make_pair(const PlanContext& ctx, const Vec& q_e, const Region* contain,
                      const std::vector<std::string>& avoid) {
  const LinearizedPlant plant = linearize(ctx.model, q_e);
  const LDIModel ldi = vertex_ldi(ctx, q_e);
  const ConstraintSet cs = vertex_constraints(ctx, plant.x_e, avoid);
  BarrierPair bp = synthesize_auto(ctx.model, plant, ldi, contain, cs, ctx.settings.alpha,
                                   ctx.settings.eps0, ctx.settings.synth);
  bp.avoid = avoid;
  if (ctx.settings.cert_samples > 0) {
    CertifyOptions co;
    co.branch = ctx.settings.synth.branch;
    bp.cert = certify(bp, ctx.model, ldi, contain, lookup(ctx, avoid), cs,
                      ctx.settings.cert_samples, ctx.settings.ldi_seed + 17, co);
    if (!bp.cert.passed()) {
      throw Error(ErrorCode::kInfeasible, "certificate failed: " + bp.cert.violations.front());
    }
  }
  return bp;
}

CertReport certify_vertex(const PlanContext& ctx, const BarrierPair& bp, int n_samples,
                          std::uint64_t seed) {
  const LDIModel ldi = vertex_ldi(ctx, bp.q_e);
  const ConstraintSet cs = vertex_constraints(ctx, bp.x_e, bp.avoid);
  const Region* contain = bp.contain.empty() ? nullptr : &ctx.region(bp.contain);
  CertifyOptions co;
  co.branch = ctx.settings.synth.branch;
  return certify(bp, ctx.model, ldi, contain, lookup(ctx, bp.avoid), cs, n_samples, seed, co);
}

namespace {

bool in_any(const std::vector<const Region*>& rs, const Vec2& x) {
  return std::any_of(rs.begin(), rs.end(), [&](const Region* r) { return contains(*r, x); });
}

bool on_branch(const PlanContext& ctx, const Vec& q) {
  if (q.size() < 2) return true;
  return ctx.settings.synth.branch == ElbowBranch::kDown ? q[1] > 0.0 : q[1] < 0.0;
}

bool usable_equilibrium(const PlanContext& ctx, const Vec& q,
                        const std::vector<const Region*>& avoid) {
  return on_branch(ctx, q) && !is_singular(ctx.model, q) &&
         !in_any(avoid, forward_kinematics(ctx.model, q));
}

std::vector<std::string> ids_of(const std::vector<const Region*>& rs) {
  std::vector<std::string> out;
  for (const Region* r : rs) out.push_back(r->id);
  return out;
}

// Task anchors carry their own region; everything else in the workspace is avoided.
int ensure_task_anchor(BPGraph& g, const PlanContext& ctx, const std::string& id) {
  if (const auto it = g.anchors.find(id); it != g.anchors.end()) return it->second;
  const Region& r = ctx.region(id);
  const Vec q = inverse_kinematics(ctx.model, r.center, ctx.settings.synth.branch);
  const int v = g.add_vertex(make_pair(ctx, q, &r, ids_of(ctx.regions_except({id}))));
  g.anchors[id] = v;
  return v;
}

bool is_region(const PlanContext& ctx, const std::string& id) {
  return std::any_of(ctx.regions.begin(), ctx.regions.end(),
                     [&](const Region& r) { return r.id == id; });
}

}  // namespace

std::vector<int> grow_between(BPGraph& g, const PlanContext& ctx, const std::string& a0,
                              const std::string& af, std::uint64_t seed) {
  const PlannerSettings& st = ctx.settings;
  if (!(st.eps0 > 0.0 && st.eps1 > 0.0 && st.eps1 <= 1.0 && st.eps0 < 1.0 - st.eps1)) {
    throw Error(ErrorCode::kInvalidScalar, "need 0 < eps0 < 1 - eps1");
  }
  // Midway pairs avoid every region except the two ends of this build.
  std::vector<std::string> keep;
  for (const std::string& id : {a0, af}) {
    if (is_region(ctx, id)) keep.push_back(id);
  }
  const std::vector<const Region*> avoid = ctx.regions_except(keep);
  const std::vector<std::string> avoid_ids = ids_of(avoid);

  auto resolve = [&](const std::string& label, bool build) -> std::optional<int> {
    if (const auto it = g.anchors.find(label); it != g.anchors.end()) return it->second;
    if (!is_region(ctx, label)) throw Error(ErrorCode::kDisconnected, "unknown anchor " + label);
    if (!build) return std::nullopt;
    return ensure_task_anchor(g, ctx, label);
  };

  const int root = *resolve(af, true);
  std::optional<int> goal = resolve(a0, false);
  const Vec q0 = goal ? g.vertices[*goal].q_e
                      : inverse_kinematics(ctx.model, ctx.region(a0).center, st.synth.branch);

  BuildRecord rec{a0, af, 0, {}};
  std::vector<int> tree = {root};
  std::map<int, int> parent;
  int newest = root;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = ctx.model.n();
  auto random_configuration = [&]() -> Vec {
    if (unit(rng) < st.goal_bias) return q0;
    for (int k = 0; k < st.sample_attempts; ++k) {
      Vec q(n);
      for (int i = 0; i < n; ++i) q[i] = -M_PI + 2.0 * M_PI * unit(rng);
      if (n >= 2) {
        q[1] = M_PI * unit(rng);
        if (st.synth.branch == ElbowBranch::kUp) q[1] = -q[1];
      }
      if (usable_equilibrium(ctx, q, avoid)) return q;
    }
    throw Error(ErrorCode::kMaxIterations, "no collision-free configuration sampled");
  };

  auto connect = [&](int from, int to) -> bool {
    const Admissibility a = edge_admissible(g.vertices[from], g.vertices[to], st.eps0);
    if (!a.admissible) return false;
    g.edges.push_back({from, to, a.eps1, a.eps2, true});
    parent[to] = from;
    return true;
  };

  while (true) {
    if (g.vertices[newest].joint_norm(q0 - g.vertices[newest].q_e) <= st.eps1) {
      if (!goal) {
        if (rec.attempts >= st.max_iters) break;
        ++rec.attempts;
        try {
          goal = resolve(a0, true);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kInfeasible && e.code() != ErrorCode::kSolverFailure) throw;
          throw Error(ErrorCode::kInfeasible, "anchor " + a0 + ": " + e.what());
        }
      }
      if (*goal == newest || connect(newest, *goal)) break;
    }
    if (rec.attempts >= st.max_iters) break;
    const Vec q_rand = random_configuration();
    const Nearest near = nearest_bp(q_rand, g, &tree);
    if (near.nu <= 1e-9) continue;
    const Vec q_att = project_to_surface(q_rand, g.vertices[near.id], st.eps1);
    ++rec.attempts;
    if (!usable_equilibrium(ctx, q_att, avoid)) continue;
    BarrierPair cand;
    try {
      cand = make_pair(ctx, q_att, nullptr, avoid_ids);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInfeasible || e.code() == ErrorCode::kSolverFailure ||
          e.code() == ErrorCode::kSingularSample || e.code() == ErrorCode::kNearSingular ||
          e.code() == ErrorCode::kEquilibriumInsideObstacle) {
        continue;
      }
      throw;
    }
    if (!edge_admissible(g.vertices[near.id], cand, st.eps0).admissible) continue;
    const int id = g.add_vertex(std::move(cand));
    connect(near.id, id);
    tree.push_back(id);
    newest = id;
  }
  if (!goal || (*goal != root && !parent.count(*goal))) {
    throw Error(ErrorCode::kMaxIterations, a0 + " -> " + af + ": no connection after " +
                                               std::to_string(rec.attempts) + " attempts");
  }
  // Walk back from a0 to the root.
  std::vector<int> seq = {*goal};
  while (seq.back() != root) seq.push_back(parent.at(seq.back()));
  if (!g.anchors.count(a0)) g.anchors[a0] = *goal;
  rec.sequence = seq;
  g.builds.push_back(rec);
  return seq;
}

BPGraph build_graph(const PlanContext& ctx, const std::string& a0, const std::string& af,
                    std::uint64_t seed) {
  BPGraph g;
  g.rng_seed = seed;
  grow_between(g, ctx, a0, af, seed);
  return g;
}

BPGraph build_scenario(const PlanContext& ctx, std::uint64_t seed, const AnchorPlan& plan) {
  if (plan.midway.size() != plan.task_pairs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one midway anchor per task pair");
  }
  BPGraph g;
  g.rng_seed = seed;
  std::seed_seq base{seed};
  std::vector<std::uint32_t> seeds(plan.task_pairs.size() + plan.midway_pairs.size());
  base.generate(seeds.begin(), seeds.end());
  std::size_t k = 0;
  for (std::size_t i = 0; i < plan.task_pairs.size(); ++i, ++k) {
    const auto& [from, to] = plan.task_pairs[i];
    const std::vector<int> seq = grow_between(g, ctx, from, to, seeds[k]);
    g.anchors[plan.midway[i]] = seq[seq.size() / 2];
  }
  for (const auto& [from, to] : plan.midway_pairs) grow_between(g, ctx, from, to, seeds[k++]);
  return g;
}

std::vector<int> shortest_path(const BPGraph& g, int from, int to) {
  // Always search from the lower id so the reverse query returns the reverse list.
  if (from > to) {
    std::vector<int> p = shortest_path(g, to, from);
    std::reverse(p.begin(), p.end());
    return p;
  }
  const int nv = static_cast<int>(g.vertices.size());
  if (from < 0 || from >= nv || to < 0 || to >= nv) {
    throw Error(ErrorCode::kDisconnected, "vertex out of range");
  }
  std::vector<std::vector<int>> adj(nv);
  for (const GraphEdge& e : g.edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  std::vector<int> prev(nv, -2);
  std::deque<int> queue = {from};
  prev[from] = -1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (u == to) break;
    for (int w : adj[u]) {
      if (prev[w] == -2) {
        prev[w] = u;
        queue.push_back(w);
      }
    }
  }
  if (prev[to] == -2) throw Error(ErrorCode::kDisconnected, "no path between vertices");
  std::vector<int> path;
  for (int v = to; v != -1; v = prev[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<int> extract_sequence(const BPGraph& g, const std::string& from_anchor,
                                  const std::string& to_anchor) {
  return shortest_path(g, g.anchor(from_anchor), g.anchor(to_anchor));
}

namespace {

bool same(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data(),
                    [](double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; });
}

bool same(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same(const CertReport& a, const CertReport& b) {
  return a.samples_used == b.samples_used && same(a.max_torque_on_boundary, b.max_torque_on_boundary) &&
         same(a.min_decrease_margin, b.min_decrease_margin) &&
         same(a.min_rate_margin, b.min_rate_margin) && same(a.max_containment, b.max_containment) &&
         a.torque_ok == b.torque_ok && a.workspace_ok == b.workspace_ok &&
         a.velocity_ok == b.velocity_ok && a.exclusion_ok == b.exclusion_ok &&
         a.containment_ok == b.containment_ok && a.decrease_ok == b.decrease_ok &&
         a.violations == b.violations;
}

bool same(const BarrierPair& a, const BarrierPair& b) {
  if (a.witness.gamma.size() != b.witness.gamma.size()) return false;
  for (std::size_t i = 0; i < a.witness.gamma.size(); ++i) {
    if (!same(a.witness.gamma[i], b.witness.gamma[i])) return false;
  }
  return a.id == b.id && same(a.q_e, b.q_e) && same(Mat(a.x_e), Mat(b.x_e)) && same(a.Q, b.Q) &&
         same(a.K, b.K) && same(a.eps0, b.eps0) && same(a.alpha, b.alpha) &&
         same(a.w_bar, b.w_bar) && same(a.cert, b.cert) && same(a.witness.scale, b.witness.scale) &&
         same(a.witness.mu_x, b.witness.mu_x) && same(a.witness.mu_u, b.witness.mu_u) &&
         same(a.witness.mu_w, b.witness.mu_w) && a.contain == b.contain && a.avoid == b.avoid;
}

}  // namespace

bool identical(const BPGraph& a, const BPGraph& b) {
  if (a.rng_seed != b.rng_seed || a.anchors != b.anchors) return false;
  if (a.vertices.size() != b.vertices.size() || a.edges.size() != b.edges.size() ||
      a.builds.size() != b.builds.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    if (!same(a.vertices[i], b.vertices[i])) return false;
  }
  for (std::size_t i = 0; i < a.edges.size(); ++i) {
    const GraphEdge& x = a.edges[i];
    const GraphEdge& y = b.edges[i];
    if (x.i != y.i || x.j != y.j || !same(x.eps1, y.eps1) || !same(x.eps2, y.eps2) ||
        x.admissible != y.admissible) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.builds.size(); ++i) {
    const BuildRecord& x = a.builds[i];
    const BuildRecord& y = b.builds[i];
    if (x.from != y.from || x.to != y.to || x.attempts != y.attempts || x.sequence != y.sequence) {
      return false;
    }
  }
  return true;
}

}  // namespace bpsa
