#include <benchmark/benchmark.h>

#include <cmath>
#include <numeric>

#include "kcontact/catalog.hpp"
#include "kcontact/regularity.hpp"
#include "kcontact/sim.hpp"

using namespace kcontact;

namespace {

constexpr double kTwoPi = 6.283185307179586;

const char* const kModels[] = {"damped_wave", "damped_sg", "cgl", "phi4_3p1"};

void tape_value(benchmark::State& state) {
  Model m(get_model(kModels[state.range(0)]));
  CompiledExpr tape(m.hamiltonian());
  auto pts = sample_points(m, 64, 11);
  EvalWorkspace ws;
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(tape.value(pts[i++ % pts.size()], ws));
  state.SetLabel(kModels[state.range(0)]);
}
BENCHMARK(tape_value)->DenseRange(0, 3);

void tape_derive(benchmark::State& state) {
  Model m(get_model(kModels[state.range(0)]));
  CompiledExpr tape(m.hamiltonian());
  auto pts = sample_points(m, 64, 11);
  std::vector<std::size_t> wrt(m.space().coordinate_count());
  std::iota(wrt.begin(), wrt.end(), 0);
  const int order = static_cast<int>(state.range(1));
  EvalWorkspace ws;
  DualValue out;
  std::size_t i = 0;
  for (auto _ : state) {
    tape.derive(pts[i++ % pts.size()], wrt, order, ws, out);
    benchmark::DoNotOptimize(out.value);
  }
  state.SetLabel(kModels[state.range(0)]);
}
BENCHMARK(tape_derive)->ArgsProduct({{0, 1, 2, 3}, {1, 2}});

void canonical_rhs(benchmark::State& state) {
  Model m(get_model("phi4_3p1"));
  auto pts = sample_points(m, 64, 5);
  PointWorkspace ws;
  HdDWSystem::CanonicalRHS out;
  std::size_t i = 0;
  for (auto _ : state) {
    m.system().canonical_rhs(pts[i++ % pts.size()], out, ws);
    benchmark::DoNotOptimize(out.dissipative);
  }
}
BENCHMARK(canonical_rhs);

// Regular canonical models only; the Legendre map is singular on the reductions.
const char* const kRegular[] = {"damped_wave", "damped_sg", "damped_kg", "phi4_3p1"};

void momentum_inversion(benchmark::State& state) {
  Model m(get_model(kRegular[state.range(0)]));
  auto pts = sample_points(m, 64, 3);
  std::vector<std::vector<double>> targets;
  const auto momenta = m.space().momentum_block();
  PointWorkspace ws;
  for (const auto& p : pts) {
    const DualValue& d = m.system().gradient(p, ws);
    std::vector<double> v;
    for (std::size_t c : momenta) v.push_back(d.gradient[c]);
    targets.push_back(std::move(v));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    std::size_t j = i++ % pts.size();
    auto p = pts[j];
    benchmark::DoNotOptimize(invert_momenta(m.system(), p, targets[j]).iterations);
  }
  state.SetLabel(kRegular[state.range(0)]);
}
BENCHMARK(momentum_inversion)->DenseRange(0, 3);

void simulate_step(benchmark::State& state) {
  Model m(get_model(kModels[state.range(0)]));
  SimConfig cfg = m.default_sim();
  if (m.space().k() == 4) {
    cfg.grid = Grid::box({8, 8, 8}, {0, 0, 0}, {kTwoPi, kTwoPi, kTwoPi});
  } else {
    cfg.grid = Grid::line(128, 0.0, kTwoPi);
  }
  cfg.dt = stable_dt(m.system(), cfg);
  cfg.t_end = 10 * cfg.dt;
  cfg.save_every = 10;
  for (auto _ : state) benchmark::DoNotOptimize(run_hddw(m.system(), cfg).size());
  state.SetLabel(kModels[state.range(0)]);
  state.SetItemsProcessed(state.iterations() * 10 * static_cast<long>(cfg.grid.size()));
}
BENCHMARK(simulate_step)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
