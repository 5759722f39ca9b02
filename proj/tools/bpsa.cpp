#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>
#include <thread>

#include "bpsa/config.hpp"
#include "bpsa/error.hpp"
#include "bpsa/executive.hpp"
#include "bpsa/persistence.hpp"
#include "bpsa/rrt.hpp"
#include "bpsa/server.hpp"
#include "bpsa/trace.hpp"

using namespace bpsa;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int cmd_plan(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed) {
  const ScenarioConfig cfg = load_config(config);
  const std::uint64_t s = seed.value_or(cfg.seeds.plan);
  const auto t0 = std::chrono::steady_clock::now();
  const BPGraph g = build_scenario(cfg.plan, s, cfg.anchors);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const BuildRecord& b : g.builds) {
    std::printf("%s -> %s: %d attempts, %zu pairs\n", b.from.c_str(), b.to.c_str(), b.attempts,
                b.sequence.size());
  }
  std::printf("graph: %zu vertices, %zu edges, seed %llu, %.1f s\n", g.vertices.size(),
              g.edges.size(), static_cast<unsigned long long>(s), secs);
  save_graph(g, out);
  return 0;
}

int cmd_certify(const std::string& config, const std::string& graph, int samples,
                std::optional<std::uint64_t> seed, const std::string& out) {
  const ScenarioConfig cfg = load_config(config);
  const BPGraph g = load_graph(graph);
  const std::uint64_t s = seed.value_or(cfg.seeds.certify);
  json pairs = json::array();
  int failed = 0;
  for (const BarrierPair& bp : g.vertices) {
    const CertReport r = certify_vertex(cfg.plan, bp, samples, s + static_cast<std::uint64_t>(bp.id));
    if (!r.passed()) ++failed;
    pairs.push_back({{"id", bp.id},
                     {"passed", r.passed()},
                     {"samples_used", r.samples_used},
                     {"max_torque_on_boundary", r.max_torque_on_boundary},
                     {"min_decrease_margin", r.min_decrease_margin},
                     {"min_rate_margin", r.min_rate_margin},
                     {"violations", r.violations}});
  }
  json edges = json::array();
  int bad_edges = 0;
  for (const GraphEdge& e : g.edges) {
    const auto& a = g.vertices.at(static_cast<std::size_t>(e.i));
    const auto& b = g.vertices.at(static_cast<std::size_t>(e.j));
    const Admissibility adm = edge_admissible(a, b, a.eps0);
    const double margin = edge_containment_margin(g, e, a.eps0, 1000, s);
    const bool ok = adm.admissible && margin >= 1e-9;
    if (!ok) ++bad_edges;
    edges.push_back({{"i", e.i}, {"j", e.j}, {"admissible", adm.admissible}, {"eps1", adm.eps1},
                     {"eps2", adm.eps2}, {"containment_margin", margin}});
  }
  json doc = {{"format_version", kFormatVersion}, {"kind", "certify_report"}, {"samples", samples},
              {"seed", s}, {"pairs", pairs}, {"edges", edges}, {"failed_pairs", failed},
              {"failed_edges", bad_edges}};
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw Error(ErrorCode::kIoError, "cannot write " + out);
    f << doc.dump(1) << '\n';
  }
  std::printf("pairs: %zu, failed %d; edges: %zu, failed %d\n", g.vertices.size(), failed,
              g.edges.size(), bad_edges);
  return failed == 0 && bad_edges == 0 ? 0 : 1;
}

int cmd_sim(const std::string& config, const std::string& graph, const std::string& script,
            const std::string& target, double duration, bool adversarial,
            std::optional<std::uint64_t> seed, const std::string& out) {
  const ScenarioConfig cfg = load_config(config);
  const BPGraph g = load_graph(graph);
  const Runtime rt(g, cfg);
  EpisodeOptions opt;
  opt.duration = duration;
  opt.trace_every = 1;
  if (!target.empty()) opt.initial_target = target;
  std::vector<ForceSegment> segs;
  if (!script.empty()) segs = load_force_script(script);
  std::mt19937_64 rng(seed.value_or(cfg.seeds.sim));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  const double w_bar = cfg.plan.bounds.w_bar;
  opt.force = [&](const ExecState& es) -> Vec2 {
    Vec2 w = scripted_force(segs, es.t);
    if (adversarial) {
      const double th = angle(rng);
      w += w_bar * Vec2(std::cos(th), std::sin(th));
    }
    return w;
  };
  const EpisodeResult r = run_episode(rt, opt);
  if (!out.empty()) save_trace(r.trace, cfg.intent.candidates, out);
  std::printf("t=%.3f settle=%.3f destination=%s settled=%d max_barrier=%.6f obstacle_ticks=%d switches=%d replans=%d%s%s\n",
              r.final.t, r.settle_time, r.final.destination.c_str(), r.settled ? 1 : 0, r.max_barrier,
              r.obstacle_ticks, r.final.switches, r.final.replans, r.breach ? " breach: " : "",
              r.breach_message.c_str());
  return r.breach ? 2 : 0;
}

int cmd_serve(const std::string& config, const std::string& graph, unsigned short port,
              std::optional<double> rate) {
  ScenarioConfig cfg = load_config(config);
  if (rate) cfg.serve_rate_hz = *rate;
  const BPGraph g = load_graph(graph);
  ServeOptions opt;
  opt.port = port;
  opt.rate_hz = cfg.serve_rate_hz;
  opt.verbose = true;
  Server server(g, cfg, opt);
  server.start();
  std::printf("serving %s on ws://127.0.0.1:%u\n", cfg.name.c_str(), server.port());
  std::fflush(stdout);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barrier-pair shared autonomy toolkit"};
  app.require_subcommand(1);

  std::string config, graph, out, script, target;
  std::optional<std::uint64_t> seed;
  int samples = 10000;
  unsigned short port = 8765;
  std::optional<double> rate;
  double duration = 60.0;
  bool adversarial = false;

  auto* plan = app.add_subcommand("plan", "build the barrier-pair graph and save it");
  plan->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--out", out, "graph output path")->required();
  plan->add_option("--seed", seed, "planner seed (default from config)");

  auto* cert = app.add_subcommand("certify", "re-certify every pair and edge of a saved graph");
  cert->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
  cert->add_option("--graph", graph, "graph file")->required();
  cert->add_option("--samples", samples, "samples per pair")->check(CLI::PositiveNumber);
  cert->add_option("--seed", seed, "sampling seed (default from config)");
  cert->add_option("--out", out, "report JSON path");

  auto* sim = app.add_subcommand("sim", "headless episode written as a CSV trace");
  sim->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--graph", graph, "graph file")->required();
  sim->add_option("--script", script, "force script CSV (t_start,t_end,fx,fy)");
  sim->add_option("--target", target, "anchor to head for at t = 0");
  sim->add_option("--duration", duration, "seconds")->check(CLI::PositiveNumber);
  sim->add_flag("--adversarial", adversarial, "add a random w_bar force each tick");
  sim->add_option("--seed", seed, "seed for --adversarial (default from config)");
  sim->add_option("--out", out, "trace CSV path");

  auto* serve = app.add_subcommand("serve", "live websocket session");
  serve->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
  serve->add_option("--graph", graph, "graph file")->required();
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--rate", rate, "state frames per second")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*plan) return cmd_plan(config, out, seed);
    if (*cert) return cmd_certify(config, graph, samples, seed, out);
    if (*sim) return cmd_sim(config, graph, script, target, duration, adversarial, seed, out);
    if (*serve) return cmd_serve(config, graph, port, rate);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
