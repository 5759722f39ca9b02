// One line per criterion; exit status is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include "bpsa/arm.hpp"
#include "bpsa/config.hpp"
#include "bpsa/executive.hpp"
#include "bpsa/intent.hpp"
#include "bpsa/ldi.hpp"
#include "bpsa/rrt.hpp"

using namespace bpsa;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;
};

void require(Outcome& o, bool ok, const std::string& what) {
  if (!ok) {
    o.pass = false;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += what;
  }
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

Vec vector_field(const RobotModel& m, const Vec& z) {
  const int n = m.n();
  JointState s{z.head(n), z.tail(n)};
  Vec out(2 * n);
  out.head(n) = s.qd;
  out.tail(n) = forward_dynamics(m, s, Vec::Zero(n), Vec2::Zero());
  return out;
}

Outcome dynamics() {
  Outcome o;
  const RobotModel m = RobotModel::reference();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-kPi, kPi), u2(0.2, kPi - 0.2);
  double sym = 0.0, min_eig = 1e300, skew = 0.0, jac = 0.0, lin = 0.0, ik = 0.0;
  const double h = 1e-3;
  for (int k = 0; k < 10000; ++k) {
    const Vec q = v2(u(rng), u(rng)), qd = v2(u(rng), u(rng));
    const Mat M = inertia(m, q);
    sym = std::max(sym, (M - M.transpose()).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat>(M).eigenvalues().minCoeff());
    auto Mh = [&](double s) { return inertia(m, q + s * h * qd); };
    const Mat Md = (Mh(-2) - 8 * Mh(-1) + 8 * Mh(1) - Mh(2)) / (12 * h);
    const Mat N = Md - 2 * coriolis(m, q, qd);
    skew = std::max(skew, (N + N.transpose()).norm());
  }
  for (int k = 0; k < 1000; ++k) {
    const Vec q = v2(u(rng), u(rng));
    const double e = 1e-6;
    Mat fd(2, 2);
    for (int i = 0; i < 2; ++i) {
      Vec dq = Vec::Zero(2);
      dq[i] = e;
      fd.col(i) = (forward_kinematics(m, q + dq) - forward_kinematics(m, q - dq)) / (2 * e);
    }
    jac = std::max(jac, (fd - jacobian(m, q)).cwiseAbs().maxCoeff());
    // Branch-matched round trip on nonsingular configurations.
    const Vec qn = v2(u(rng), u2(rng));
    if (is_singular(m, qn)) continue;
    const Vec back = inverse_kinematics(m, forward_kinematics(m, qn), ElbowBranch::kDown);
    ik = std::max(ik, std::abs(std::remainder(back[0] - qn[0], 2 * kPi)) +
                          std::abs(std::remainder(back[1] - qn[1], 2 * kPi)));
  }
  for (int k = 0; k < 100; ++k) {
    const Vec q_e = v2(u(rng), u2(rng));
    const LinearizedPlant p = linearize(m, q_e);
    Vec z0 = Vec::Zero(4);
    z0.head(2) = q_e;
    const double e = 1e-6;
    for (int i = 0; i < 4; ++i) {
      Vec dz = Vec::Zero(4);
      dz[i] = e;
      const Vec col = (vector_field(m, z0 + dz) - vector_field(m, z0 - dz)) / (2 * e);
      lin = std::max(lin, (col - p.A.col(i)).cwiseAbs().maxCoeff());
    }
    // Input columns: torque and hand force.
    const JointState rest = JointState::at_rest(q_e);
    for (int i = 0; i < 2; ++i) {
      Vec du = Vec::Zero(2);
      du[i] = e;
      const Vec cu = (forward_dynamics(m, rest, du, Vec2::Zero()) - forward_dynamics(m, rest, -du, Vec2::Zero())) / (2 * e);
      lin = std::max(lin, (cu - p.B_u.bottomRows(2).col(i)).cwiseAbs().maxCoeff());
      Vec2 dw = Vec2::Zero();
      dw[i] = e;
      const Vec cw = (forward_dynamics(m, rest, Vec::Zero(2), dw) - forward_dynamics(m, rest, Vec::Zero(2), -dw)) / (2 * e);
      lin = std::max(lin, (cw - p.B_w.bottomRows(2).col(i)).cwiseAbs().maxCoeff());
    }
  }
  require(o, sym == 0.0 && min_eig > 0.0, "M symmetry/PD");
  require(o, skew < 1e-9, "skew " + fmt("%.2e", skew));
  require(o, jac < 1e-6, "jacobian " + fmt("%.2e", jac));
  require(o, lin < 1e-5, "linearization " + fmt("%.2e", lin));
  require(o, ik < 1e-9, "ik " + fmt("%.2e", ik));
  o.detail = "skew " + fmt("%.1e", skew) + ", J fd " + fmt("%.1e", jac) + ", A/B fd " + fmt("%.1e", lin) +
             ", ik " + fmt("%.1e", ik) + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome ldi() {
  Outcome o;
  const RobotModel m = RobotModel::reference();
  StateBox box;
  box.q_e = v2(0.0, kPi / 2);
  box.dq_max = Vec::Constant(2, 0.3);
  box.dqd_max = Vec::Constant(2, 1.0);
  auto fit_set = sample_domain(box, 2000, 1);
  LDIModel fit = fit_norm_bound(m, box, fit_set, 0.1);
  const auto fresh = sample_domain(box, 100000, 2);
  auto bad = inclusion_violations(fit, m, fresh);
  const std::size_t first = bad.size();
  int refits = 0;
  if (!bad.empty()) {
    for (auto k : bad) fit_set.push_back(fresh[k]);
    fit = fit_norm_bound(m, box, fit_set, 0.1);
    bad = inclusion_violations(fit, m, fresh);
    refits = 1;
  }
  require(o, static_cast<double>(first) <= 0.001 * fresh.size(), "first-stage violators");
  require(o, bad.empty(), std::to_string(bad.size()) + " violators after refit");
  o.detail = "1e5 samples, " + std::to_string(first) + " first-stage violators, " +
             std::to_string(refits) + " refit" + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome certification(const ScenarioConfig& cfg, const BPGraph& g) {
  Outcome o;
  int failed = 0;
  double torque = 0.0, decrease = 1e300;
  for (const BarrierPair& bp : g.vertices) {
    const CertReport r = certify_vertex(cfg.plan, bp, 10000, cfg.seeds.certify + bp.id);
    if (!r.passed()) ++failed;
    torque = std::max(torque, r.max_torque_on_boundary);
    decrease = std::min(decrease, r.min_decrease_margin);
  }
  require(o, failed == 0, std::to_string(failed) + " pairs with violations");
  o.detail = std::to_string(g.vertices.size()) + " pairs x 1e4 samples, max |u| " + fmt("%.3f", torque) +
             ", min -dB/dt " + fmt("%.3g", decrease) + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

BarrierPair identity_pair(const Vec& q_e) {
  BarrierPair bp;
  bp.q_e = q_e;
  bp.Q = Mat::Identity(4, 4);
  return bp;
}

Outcome geometry(const ScenarioConfig& cfg, const BPGraph& g) {
  Outcome o;
  const double eps0 = cfg.plan.settings.eps0;
  int bad = 0;
  double margin = 1e300;
  for (const GraphEdge& e : g.edges) {
    const auto& a = g.vertices[static_cast<std::size_t>(e.i)];
    const auto& b = g.vertices[static_cast<std::size_t>(e.j)];
    if (!edge_admissible(a, b, eps0).admissible) ++bad;
    margin = std::min(margin, edge_containment_margin(g, e, eps0, 1000, 5));
  }
  require(o, bad == 0, std::to_string(bad) + " edges fail the matrix conditions");
  require(o, margin >= 1e-9, "containment margin " + fmt("%.3g", margin));
  const BarrierPair p1 = identity_pair(v2(0, 1)), p2 = identity_pair(v2(0.8, 1));
  require(o, edge_admissible(p1, p2, 0.15).admissible, "identity case eps0=0.15");
  require(o, !edge_admissible(p1, p2, 0.25).admissible, "identity case eps0=0.25");
  o.detail = std::to_string(g.edges.size()) + " edges, min containment margin " + fmt("%.3g", margin) +
             ", identity cases ok" + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome build(const ScenarioConfig& cfg, const BPGraph& g, const BPGraph& again) {
  Outcome o;
  const std::vector<std::pair<std::string, std::string>> expect = {
      {"a2", "a3"}, {"a3", "a1"}, {"a1", "a2"}, {"c1", "c2"}, {"c2", "c3"}, {"c3", "c1"}};
  require(o, g.builds.size() == expect.size(), "expected six builds");
  int worst = 0;
  for (std::size_t k = 0; k < g.builds.size() && k < expect.size(); ++k) {
    const BuildRecord& b = g.builds[k];
    worst = std::max(worst, b.attempts);
    require(o, b.from == expect[k].first && b.to == expect[k].second, "build order");
    require(o, b.attempts <= cfg.plan.settings.max_iters, b.from + "-" + b.to + " over budget");
    require(o, b.sequence.size() >= 2 && b.sequence.front() == g.anchor(b.from) &&
                   b.sequence.back() == g.anchor(b.to),
            b.from + "-" + b.to + " sequence ends");
  }
  require(o, identical(g, again), "rebuild differs");
  o.detail = std::to_string(g.builds.size()) + " sequences, " + std::to_string(g.vertices.size()) +
             " pairs, max attempts " + std::to_string(worst) + ", rebuild bit-identical" +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

double bessel(double k, double w_bar) {
  if (k == 0.0) return kPi * w_bar * w_bar;
  return 2.0 * kPi * w_bar * std::cyl_bessel_i(1.0, k * w_bar) / k;
}

Outcome intent(const ScenarioConfig& cfg) {
  Outcome o;
  double worst = 0.0;
  for (double beta : {0.0, 0.1, 0.5, 1.0, 2.0, 4.0}) {
    for (double d : {0.0, 0.05, 0.3, 1.0, 1.5, 2.5}) {
      for (double w_bar : {0.25, 1.0, 2.0}) {
        const Vec2 x_t(0.1, -0.2);
        const Vec2 x_a = x_t + d * Vec2(std::cos(0.7), std::sin(0.7));
        worst = std::max(worst, std::abs(partition(x_t, x_a, beta, w_bar) / bessel(beta * d, w_bar) - 1.0));
      }
    }
  }
  require(o, worst <= 1e-8, "partition rel err " + fmt("%.2e", worst));

  std::vector<Vec2> centers;
  for (const std::string& id : cfg.intent.candidates) centers.push_back(cfg.plan.region(id).center);
  const BeliefState b0 = BeliefState::uniform(cfg.intent.candidates, centers, cfg.intent.beta1);
  const double w_bar = cfg.plan.bounds.w_bar;

  BeliefState b = b0;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double norm_err = 0.0;
  for (int k = 0; k < 2000; ++k) {
    b = update_belief(b, Vec2(u(rng), u(rng)), Vec2(u(rng), 0.5 + u(rng)), w_bar);
    norm_err = std::max(norm_err, std::abs(b.probs.sum() - 1.0));
  }
  require(o, norm_err <= 1e-12, "normalisation " + fmt("%.2e", norm_err));

  // Scripted 1 N pushes from the centroid of the candidates.
  const int n = static_cast<int>(centers.size());
  Vec2 x_t = Vec2::Zero();
  for (const Vec2& c : centers) x_t += c / n;
  int slowest = 0;
  for (int to = 0; to < n; ++to) {
    const Vec2 w = (centers[to] - x_t).normalized();
    BeliefState bb = b0;
    int current = -1, flips = -1;
    for (int k = 1; k <= 20 && flips < 0; ++k) {
      bb = update_belief(bb, w, x_t, w_bar, cfg.intent.threshold);
      current = estimate_target(bb, current, cfg.intent.switch_margin);
      if (current == to) flips = k;
    }
    require(o, flips > 0, "no flip to " + cfg.intent.candidates[static_cast<std::size_t>(to)]);
    slowest = std::max(slowest, flips);
  }

  const BeliefState sym = BeliefState::uniform({"l", "r"}, {Vec2(-1, 0), Vec2(1, 0)}, 1.0);
  const BeliefState after = update_belief(sym, Vec2(0, 1), Vec2(0, 0), 1.0);
  const double sym_err = (after.probs - sym.probs).cwiseAbs().maxCoeff();
  require(o, sym_err <= 1e-12, "symmetric force " + fmt("%.2e", sym_err));
  o.detail = "Bessel " + fmt("%.1e", worst) + ", norm " + fmt("%.1e", norm_err) + ", flips within " +
             std::to_string(slowest) + " updates, symmetric " + fmt("%.1e", sym_err) +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome episodes(const ScenarioConfig& cfg, const BPGraph& g) {
  Outcome o;
  const Runtime rt(g, cfg);
  std::string times;
  auto safe = [&](const EpisodeResult& r, const std::string& name) {
    require(o, !r.breach, name + " breach: " + r.breach_message);
    require(o, r.max_barrier <= cfg.exec.breach, name + " barrier " + fmt("%.4f", r.max_barrier));
    require(o, r.obstacle_ticks == 0, name + " entered an obstacle");
    require(o, r.switch_violations == 0 && r.continuity_violations == 0, name + " switching");
  };

  for (const std::string& target : cfg.intent.candidates) {
    EpisodeOptions opt;
    opt.duration = 60.0;
    opt.initial_target = target;
    opt.stop_when_settled = true;
    const EpisodeResult r = run_episode(rt, opt);
    safe(r, "zero-force " + target);
    require(o, r.settled && r.final.destination == target, "zero-force " + target + " not settled");
    times += (times.empty() ? "" : "/") + fmt("%.1f", r.final.t);
  }

  // Push toward a3, then from a3 toward a2.
  {
    const Vec2 a1 = cfg.plan.region("a1").center, a2 = cfg.plan.region("a2").center,
               a3 = cfg.plan.region("a3").center;
    const std::vector<ForceSegment> script = {{0.0, 3.0, (a3 - a1).normalized()},
                                              {15.0, 18.0, (a2 - a3).normalized()}};
    EpisodeOptions opt;
    opt.duration = 60.0;
    opt.force = [&](const ExecState& es) { return scripted_force(script, es.t); };
    const EpisodeResult r = run_episode(rt, opt);
    safe(r, "scripted");
    const bool order = r.targets_seen.size() >= 3 && r.targets_seen[1] == "a3" && r.targets_seen.back() == "a2";
    require(o, order, "scripted target sequence");
    require(o, r.settled && r.final.destination == "a2", "scripted did not reach a2");
    require(o, contains(cfg.plan.region("a2"), forward_kinematics(cfg.plan.model, r.final.joint.q)),
            "scripted final hand outside a2");
  }

  {
    std::mt19937_64 rng(cfg.seeds.sim);
    std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
    EpisodeOptions opt;
    opt.duration = 60.0;
    const double w_bar = cfg.plan.bounds.w_bar;
    opt.force = [&](const ExecState&) {
      const double th = u(rng);
      return Vec2(w_bar * std::cos(th), w_bar * std::sin(th));
    };
    safe(run_episode(rt, opt), "adversarial");
  }
  o.detail = "settle " + times + " s, scripted a1->a3->a2 ok, 60 s adversarial ok" +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string config = argc > 1 ? argv[1] : BPSA_SOURCE_DIR "/scenarios/reference.json";
  int failures = 0;
  auto report = [&](int id, double limit, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit > 0.0 && secs > limit) {
      o.pass = false;
      o.detail += " | over time limit " + fmt("%.0f s", limit);
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d: %s  %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  const ScenarioConfig cfg = load_config(config);
  report(1, 30.0, dynamics);
  report(2, 60.0, ldi);

  // Criterion 5 builds the graph the later criteria use.
  BPGraph g;
  report(5, 0.0, [&] {
    g = build_scenario(cfg.plan, cfg.seeds.plan, cfg.anchors);
    const BPGraph again = build_scenario(cfg.plan, cfg.seeds.plan, cfg.anchors);
    return build(cfg, g, again);
  });
  if (g.vertices.empty()) {
    std::printf("criterion 3: FAIL  no graph\ncriterion 4: FAIL  no graph\n");
    failures += 2;
  } else {
    report(3, 600.0, [&] { return certification(cfg, g); });
    report(4, 0.0, [&] { return geometry(cfg, g); });
  }
  report(6, 0.0, [&] { return intent(cfg); });
  if (g.vertices.empty()) {
    std::printf("criterion 7: FAIL  no graph\n");
    ++failures;
  } else {
    report(7, 300.0, [&] { return episodes(cfg, g); });
  }
  return failures;
}
