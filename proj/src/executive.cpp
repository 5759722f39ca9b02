#include "bpsa/executive.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "bpsa/error.hpp"

namespace bpsa {

AnchorFSM::AnchorFSM(std::map<std::string, std::vector<std::string>> adjacency, std::string current)
    : adj_(std::move(adjacency)), current_(std::move(current)) {
  for (auto& [k, v] : adj_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  // Make every referenced label a node before checking symmetry.
  std::set<std::string> labels;
  for (const auto& [k, v] : adj_) {
    labels.insert(k);
    labels.insert(v.begin(), v.end());
  }
  for (const std::string& l : labels) adj_[l];
  for (const auto& [k, v] : adj_) {
    for (const std::string& n : v) {
      if (n == k) throw Error(ErrorCode::kValidationError, "exec.adjacency." + k + ": self loop");
      const auto& back = adj_.at(n);
      if (!std::binary_search(back.begin(), back.end(), k)) {
        throw Error(ErrorCode::kValidationError,
                    "exec.adjacency." + n + ": missing back edge to " + k);
      }
    }
  }
  if (!has(current_)) {
    throw Error(ErrorCode::kValidationError, "exec.start: unknown anchor " + current_);
  }
}

AnchorFSM AnchorFSM::from_plan(const AnchorPlan& plan, const std::string& current) {
  std::map<std::string, std::vector<std::string>> adj;
  auto link = [&](const std::string& a, const std::string& b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (std::size_t k = 0; k < plan.task_pairs.size(); ++k) {
    const auto& [a0, af] = plan.task_pairs[k];
    if (k < plan.midway.size()) {
      link(a0, plan.midway[k]);
      link(plan.midway[k], af);
    } else {
      link(a0, af);
    }
  }
  for (const auto& [a, b] : plan.midway_pairs) link(a, b);
  return AnchorFSM(std::move(adj), current);
}

void AnchorFSM::set_current(const std::string& label) {
  if (!has(label)) throw Error(ErrorCode::kInvalidArgument, "unknown anchor " + label);
  current_ = label;
}

std::vector<std::string> AnchorFSM::route(const std::string& from, const std::string& to) const {
  if (!has(from) || !has(to)) throw Error(ErrorCode::kDisconnected, from + " -> " + to);
  std::map<std::string, std::string> parent;
  std::deque<std::string> open{from};
  parent[from] = from;
  while (!open.empty()) {
    const std::string u = open.front();
    open.pop_front();
    if (u == to) break;
    for (const std::string& v : adj_.at(u)) {
      if (parent.count(v)) continue;
      parent[v] = u;
      open.push_back(v);
    }
  }
  if (!parent.count(to)) throw Error(ErrorCode::kDisconnected, from + " -> " + to);
  std::vector<std::string> path{to};
  while (path.back() != from) path.push_back(parent.at(path.back()));
  std::reverse(path.begin(), path.end());
  return path;
}

Runtime::Runtime(const BPGraph& g, const ScenarioConfig& cfg) : graph(g), config(cfg) {
  for (const auto& [label, id] : g.anchors) anchor_of[id] = label;
}

Vec2 Runtime::center(int candidate) const {
  return config.plan.region(config.intent.candidates.at(static_cast<std::size_t>(candidate))).center;
}

ControlOutput control(const BarrierPair& bp, const JointState& s, const Vec& u_bounds) {
  ControlOutput out;
  out.u = bp.K * bp.state_error(s);
  for (Eigen::Index i = 0; i < out.u.size(); ++i) {
    const double lim = u_bounds[i];
    if (std::abs(out.u[i]) > lim) {
      out.u[i] = std::clamp(out.u[i], -lim, lim);
      out.clamped = true;
    }
  }
  return out;
}

namespace {

Vec torque_bounds(const RobotModel& m) {
  return Eigen::Map<const Vec>(m.torque_limits.data(), static_cast<Eigen::Index>(m.torque_limits.size()));
}

AnchorFSM make_fsm(const Runtime& rt) {
  const ExecSettings& ex = rt.config.exec;
  if (!ex.adjacency.empty()) return AnchorFSM(ex.adjacency, ex.start);
  return AnchorFSM::from_plan(rt.config.anchors, ex.start);
}

bool in_residue(const BarrierPair& bp, const JointState& s) {
  return bp.barrier(s) <= bp.eps0 * bp.eps0 - 1.0;
}

}  // namespace

ExecState initial_state(const Runtime& rt, const AnchorFSM& fsm) {
  const std::string& start = fsm.current();
  const int v = rt.graph.anchor(start);
  ExecState es;
  es.joint = JointState::at_rest(rt.graph.vertices.at(static_cast<std::size_t>(v)).q_e);
  es.active_sequence = {v};
  es.last_anchor = start;
  es.destination = start;
  std::vector<Vec2> centers;
  for (std::size_t i = 0; i < rt.config.intent.candidates.size(); ++i) {
    centers.push_back(rt.center(static_cast<int>(i)));
  }
  es.belief = BeliefState::uniform(rt.config.intent.candidates, centers, rt.config.intent.beta1);
  es.target = es.belief.index_of(start);
  es.u = Vec::Zero(es.joint.q.size());
  return es;
}

ExecState maybe_advance(const ExecState& es, const Runtime& rt) {
  if (es.active_index + 1 >= es.active_sequence.size()) return es;
  const int next = es.active_sequence[es.active_index + 1];
  const BarrierPair& bp = rt.graph.vertices.at(static_cast<std::size_t>(next));
  if (bp.barrier(es.joint) > -rt.config.exec.delta_switch) return es;
  ExecState out = es;
  ++out.active_index;
  ++out.switches;
  if (auto it = rt.anchor_of.find(next); it != rt.anchor_of.end()) out.last_anchor = it->second;
  return out;
}

ExecState replan(const ExecState& es, const AnchorFSM& fsm, const Runtime& rt,
                 const std::string& new_target) {
  if (new_target == es.destination) return es;
  if (!fsm.has(new_target)) throw Error(ErrorCode::kInvalidArgument, "unknown anchor " + new_target);
  // Join at the first anchor from the active vertex on.
  std::size_t join = es.active_index;
  while (join < es.active_sequence.size() && !rt.anchor_of.count(es.active_sequence[join])) ++join;
  if (join == es.active_sequence.size()) {
    throw Error(ErrorCode::kDisconnected, "active sequence has no anchor ahead");
  }
  const std::string& join_label = rt.anchor_of.at(es.active_sequence[join]);
  const std::vector<std::string> route = fsm.route(join_label, new_target);

  ExecState out = es;
  out.active_sequence.assign(es.active_sequence.begin() + static_cast<std::ptrdiff_t>(es.active_index),
                             es.active_sequence.begin() + static_cast<std::ptrdiff_t>(join) + 1);
  for (std::size_t k = 0; k + 1 < route.size(); ++k) {
    const std::vector<int> leg = extract_sequence(rt.graph, route[k], route[k + 1]);
    out.active_sequence.insert(out.active_sequence.end(), leg.begin() + 1, leg.end());
  }
  out.active_index = 0;
  out.destination = new_target;
  ++out.replans;
  return out;
}

ExecState tick(const ExecState& es, const Runtime& rt, AnchorFSM& fsm, const Vec2& w_t) {
  const ScenarioConfig& cfg = rt.config;
  const double w_bar = cfg.plan.bounds.w_bar;
  Vec2 w = w_t;
  if (w.norm() > w_bar) w *= w_bar / w.norm();

  ExecState s = es;
  if (s.t >= s.next_belief_t - 1e-9) {
    const Vec2 x = forward_kinematics(cfg.plan.model, s.joint.q);
    s.belief = update_belief(s.belief, w, x, w_bar, cfg.intent.threshold);
    s.next_belief_t += 1.0 / cfg.intent.rate_hz;
    const int target = estimate_target(s.belief, s.target, cfg.intent.switch_margin);
    if (target != s.target && target >= 0) {
      s.target = target;
      s = replan(s, fsm, rt, s.belief.candidates[static_cast<std::size_t>(target)]);
    }
  }

  s = maybe_advance(s, rt);
  fsm.set_current(s.last_anchor);

  const BarrierPair& bp = rt.graph.vertices.at(static_cast<std::size_t>(s.active_vertex()));
  const ControlOutput c = control(bp, s.joint, torque_bounds(cfg.plan.model));
  if (c.clamped) ++s.clamp_events;
  s.u = c.u;
  s.w = w;
  s.joint = step(cfg.plan.model, s.joint, c.u, w, cfg.exec.dt);
  s.t += cfg.exec.dt;

  const double b = bp.barrier(s.joint);
  if (!(b <= cfg.exec.breach)) {
    throw Error(ErrorCode::kSafetyBreach, "pair " + std::to_string(bp.id) + " barrier " +
                                              std::to_string(b) + " at t=" + std::to_string(s.t));
  }
  return s;
}

Vec2 scripted_force(const std::vector<ForceSegment>& script, double t) {
  Vec2 w = Vec2::Zero();
  for (const ForceSegment& seg : script) {
    if (t >= seg.t_start && t < seg.t_end) w += seg.w;
  }
  return w;
}

EpisodeResult run_episode(const Runtime& rt, const EpisodeOptions& opt) {
  const ScenarioConfig& cfg = rt.config;
  const RobotModel& model = cfg.plan.model;
  AnchorFSM fsm = make_fsm(rt);
  ExecState es = initial_state(rt, fsm);
  if (opt.initial_target) {
    es = replan(es, fsm, rt, *opt.initial_target);
    const int idx = es.belief.index_of(*opt.initial_target);
    if (idx >= 0) es.target = idx;
  }

  EpisodeResult r;
  std::set<std::string> allowed{cfg.exec.start, es.destination};
  r.targets_seen.push_back(es.destination);
  const long n = std::lround(opt.duration / cfg.exec.dt);

  auto record = [&](const ExecState& s) {
    const BarrierPair& bp = rt.graph.vertices.at(static_cast<std::size_t>(s.active_vertex()));
    const std::string target =
        s.target >= 0 ? s.belief.candidates[static_cast<std::size_t>(s.target)] : std::string();
    r.trace.push_back({s.t, s.joint.q, s.joint.qd, forward_kinematics(model, s.joint.q), s.u, s.w,
                       bp.id, bp.barrier(s.joint), s.belief.probs, target});
  };

  for (long k = 0; k < n; ++k) {
    const Vec2 w = opt.force ? opt.force(es) : Vec2::Zero();
    ExecState next;
    try {
      next = tick(es, rt, fsm, w);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSafetyBreach) throw;
      r.breach = true;
      r.breach_message = e.what();
      break;
    }

    if (next.destination != es.destination) {
      allowed.insert(next.destination);
      r.targets_seen.push_back(next.destination);
    }
    // Independent checks of every switch.
    const int before = es.active_vertex();
    const int after = next.active_vertex();
    if (before != after) {
      const BarrierPair& a = rt.graph.vertices.at(static_cast<std::size_t>(before));
      const BarrierPair& b = rt.graph.vertices.at(static_cast<std::size_t>(after));
      if (b.barrier(es.joint) > -cfg.exec.delta_switch + 1e-12) ++r.switch_violations;
      if (!edge_admissible(a, b, a.eps0).admissible) ++r.continuity_violations;
    }

    es = std::move(next);
    const BarrierPair& bp = rt.graph.vertices.at(static_cast<std::size_t>(es.active_vertex()));
    r.max_barrier = std::max(r.max_barrier, bp.barrier(es.joint));
    const Vec2 x = forward_kinematics(model, es.joint.q);
    for (const Region& reg : cfg.plan.regions) {
      if (!contains(reg, x)) continue;
      if (reg.kind != RegionKind::kTask) {
        ++r.obstacle_ticks;
      } else if (!allowed.count(reg.id)) {
        ++r.foreign_task_ticks;
      }
    }
    if (opt.trace_every > 0 && k % opt.trace_every == 0) record(es);

    const bool at_end = es.active_index + 1 == es.active_sequence.size();
    const bool settled = at_end && in_residue(bp, es.joint);
    if (settled && r.settle_time < 0.0) r.settle_time = es.t;
    if (!settled) r.settle_time = -1.0;
    if (settled && opt.stop_when_settled) break;
  }
  const BarrierPair& last = rt.graph.vertices.at(static_cast<std::size_t>(es.active_vertex()));
  r.settled = es.active_index + 1 == es.active_sequence.size() && in_residue(last, es.joint);
  r.final = std::move(es);
  return r;
}

}  // namespace bpsa
