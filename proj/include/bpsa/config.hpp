#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bpsa/rrt.hpp"

namespace bpsa {

inline constexpr int kFormatVersion = 1;

struct IntentSettings {
  std::vector<std::string> candidates = {"a1", "a2", "a3"};
  double beta1 = 1.0;       // 1/(N*m)
  double threshold = 0.05;  // N
  double rate_hz = 10.0;
  double switch_margin = 0.1;
};

struct ExecSettings {
  double dt = 0.001;           // s
  double delta_switch = 0.02;  // barrier margin required to switch
  double breach = 0.01;        // barrier value treated as a safety breach
  std::string start = "a1";
  // Anchor adjacency; empty means the one implied by the anchor plan.
  std::map<std::string, std::vector<std::string>> adjacency;
};

struct Seeds {
  std::uint64_t plan = 7;
  std::uint64_t certify = 11;
  std::uint64_t sim = 3;
};

struct ScenarioConfig {
  std::string name;
  PlanContext plan;
  AnchorPlan anchors;
  IntentSettings intent;
  ExecSettings exec;
  Seeds seeds;
  double serve_rate_hz = 60.0;
};

// Throws ParseError (missing file, bad JSON) or ValidationError (message
// starts with the dotted field path).
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& text);

}  // namespace bpsa
