#pragma once

#include <filesystem>

#include "bpsa/config.hpp"
#include "bpsa/persistence.hpp"
#include "bpsa/rrt.hpp"

namespace bpsa::testing {

inline ScenarioConfig reference_config() {
  return load_config(BPSA_SOURCE_DIR "/scenarios/reference.json");
}

// Built once by the plan fixture; rebuilt here when run outside ctest.
inline BPGraph reference_graph() {
  const std::string path = BPSA_GRAPH_PATH;
  if (std::filesystem::exists(path)) return load_graph(path);
  const ScenarioConfig cfg = reference_config();
  BPGraph g = build_scenario(cfg.plan, cfg.seeds.plan, cfg.anchors);
  save_graph(g, path);
  return g;
}

}  // namespace bpsa::testing
