// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <numbers>

#include "bpsa/config.hpp"
#include "bpsa/ldi.hpp"
#include "bpsa/rrt.hpp"
#include "bpsa/synth.hpp"

using namespace bpsa;

namespace {

StateBox box() {
  StateBox b;
  b.q_e = (Vec(2) << 0.0, std::numbers::pi / 2).finished();
  b.dq_max = Vec::Constant(2, 0.3);
  b.dqd_max = Vec::Constant(2, 1.0);
  return b;
}

template <bool Parallel>
void BM_FitNormBound(benchmark::State& st) {
  const RobotModel m = RobotModel::reference();
  const auto samples = sample_domain(box(), static_cast<int>(st.range(0)), 1);
  for (auto _ : st) {
    LDIModel l = Parallel ? fit_norm_bound(m, box(), samples, 0.1)
                          : fit_norm_bound_serial(m, box(), samples, 0.1);
    benchmark::DoNotOptimize(l.damping.sigma);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <bool Parallel>
void BM_InclusionViolations(benchmark::State& st) {
  const RobotModel m = RobotModel::reference();
  const LDIModel l = fit_norm_bound(m, box(), sample_domain(box(), 2000, 1), 0.1);
  const auto fresh = sample_domain(box(), static_cast<int>(st.range(0)), 2);
  for (auto _ : st) {
    auto bad = Parallel ? inclusion_violations(l, m, fresh) : inclusion_violations_serial(l, m, fresh);
    benchmark::DoNotOptimize(bad.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

struct CertFixture {
  ScenarioConfig cfg = load_config(BPSA_SOURCE_DIR "/scenarios/reference.json");
  BarrierPair bp;
  LDIModel ldi;
  ConstraintSet cs;
  std::vector<Region> obstacles;
  CertFixture() {
    const Region& a3 = cfg.plan.region("a3");
    std::vector<std::string> avoid;
    for (const Region& r : cfg.plan.regions) {
      if (r.id != "a3") avoid.push_back(r.id);
    }
    bp = make_pair(cfg.plan, inverse_kinematics(cfg.plan.model, a3.center), &a3, avoid);
    ldi = vertex_ldi(cfg.plan, bp.q_e);
    cs = vertex_constraints(cfg.plan, bp.x_e, avoid);
    for (const std::string& id : avoid) obstacles.push_back(cfg.plan.region(id));
  }
};

template <bool Parallel>
void BM_Certify(benchmark::State& st) {
  static const CertFixture f;
  const Region& a3 = f.cfg.plan.region("a3");
  const int n = static_cast<int>(st.range(0));
  for (auto _ : st) {
    CertReport r = Parallel ? certify(f.bp, f.cfg.plan.model, f.ldi, &a3, f.obstacles, f.cs, n, 3)
                            : certify_serial(f.bp, f.cfg.plan.model, f.ldi, &a3, f.obstacles, f.cs, n, 3);
    benchmark::DoNotOptimize(r.samples_used);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_FitNormBound<false>)->Name("fit_norm_bound/serial")->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitNormBound<true>)->Name("fit_norm_bound/openmp")->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InclusionViolations<false>)->Name("inclusion_violations/serial")->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InclusionViolations<true>)->Name("inclusion_violations/openmp")->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Certify<false>)->Name("certify/serial")->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Certify<true>)->Name("certify/openmp")->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
