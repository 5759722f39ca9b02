#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bpsa/config.hpp"
#include "bpsa/intent.hpp"
#include "bpsa/rrt.hpp"

namespace bpsa {

// Finite state machine over anchor labels.
class AnchorFSM {
 public:
  // Throws ValidationError when the adjacency is not symmetric or `current` is unknown.
  AnchorFSM(std::map<std::string, std::vector<std::string>> adjacency, std::string current);

  // a0 - c - af for each task pair, plus the midway pairs.
  static AnchorFSM from_plan(const AnchorPlan& plan, const std::string& current);

  const std::map<std::string, std::vector<std::string>>& adjacency() const { return adj_; }
  const std::string& current() const { return current_; }
  void set_current(const std::string& label);
  bool has(const std::string& label) const { return adj_.count(label) > 0; }

  // Breadth-first; neighbours visited in label order. Throws Disconnected.
  std::vector<std::string> route(const std::string& from, const std::string& to) const;

 private:
  std::map<std::string, std::vector<std::string>> adj_;
  std::string current_;
};

struct ExecState {
  double t = 0.0;
  JointState joint;
  std::vector<int> active_sequence;
  std::size_t active_index = 0;
  int target = -1;  // candidate index into belief
  BeliefState belief;
  std::string last_anchor;
  std::string destination;   // anchor label the sequence ends at
  double next_belief_t = 0.0;
  Vec u;                     // last applied torque
  Vec2 w = Vec2::Zero();     // last applied force
  int clamp_events = 0;
  int switches = 0;
  int replans = 0;

  int active_vertex() const { return active_sequence.at(active_index); }
};

// Everything the control loop reads but never changes.
struct Runtime {
  const BPGraph& graph;
  const ScenarioConfig& config;
  std::map<int, std::string> anchor_of;  // vertex id -> label

  Runtime(const BPGraph& g, const ScenarioConfig& cfg);
  Vec2 center(int candidate) const;
};

struct ControlOutput {
  Vec u;
  bool clamped = false;
};

// u = K [q - q_e; qd], clamped per joint to +-u_bounds.
ControlOutput control(const BarrierPair& bp, const JointState& s, const Vec& u_bounds);

// Sits at the start anchor's equilibrium with a uniform belief.
ExecState initial_state(const Runtime& rt, const AnchorFSM& fsm);

ExecState maybe_advance(const ExecState& es, const Runtime& rt);

// new_target is an anchor label; unchanged when it is already the destination.
ExecState replan(const ExecState& es, const AnchorFSM& fsm, const Runtime& rt,
                 const std::string& new_target);

// belief (own cadence), target + replan, advance, control, step.
// Throws SafetyBreach when the active barrier exceeds the breach level.
ExecState tick(const ExecState& es, const Runtime& rt, AnchorFSM& fsm, const Vec2& w_t);

struct ForceSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  Vec2 w = Vec2::Zero();
};

// Piecewise-constant force, zero outside the segments.
Vec2 scripted_force(const std::vector<ForceSegment>& script, double t);

struct TraceRow {
  double t;
  Vec q, qd;
  Vec2 x;
  Vec u;
  Vec2 w;
  int bp;
  double barrier;
  Vec belief;
  std::string target;
};

struct EpisodeOptions {
  double duration = 60.0;
  std::optional<std::string> initial_target;  // replan here at t = 0
  std::function<Vec2(const ExecState&)> force;  // defaults to zero
  bool stop_when_settled = false;  // stop once inside the destination residue set
  int trace_every = 0;             // 0 disables the trace
};

struct EpisodeResult {
  bool breach = false;
  std::string breach_message;
  double max_barrier = -1.0;
  int obstacle_ticks = 0;   // ticks with the hand inside an obstacle or base region
  int foreign_task_ticks = 0;  // inside a task region that is neither start nor final target
  bool settled = false;     // ended inside the destination residue set
  double settle_time = -1.0;
  int switch_violations = 0;  // switches into a pair with barrier above -delta_switch
  int continuity_violations = 0;
  ExecState final;
  std::vector<TraceRow> trace;
  std::vector<std::string> targets_seen;
};

EpisodeResult run_episode(const Runtime& rt, const EpisodeOptions& opt);

}  // namespace bpsa
