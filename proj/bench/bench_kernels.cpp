// Serial reference vs OpenMP path for the batch kernels.
#include <benchmark/benchmark.h>

#include "advkit/attack.hpp"
#include "advkit/bayesopt.hpp"
#include "advkit/defense.hpp"
#include "advkit/ensemble_attacks.hpp"
#include "advkit/eval.hpp"

using namespace advkit;

namespace {

struct Fixture {
  Dataset data;
  ConstraintSchema schema = ConstraintSchema::box(8);
  ModelPtr mlp;
  AttackInputs in;

  Fixture() {
    data = synth({.n_per_class = 200, .d = 8, .separation = 0.5, .noise = 0.08}, Seed{1});
    HyperParams hp;
    hp.epochs = 30;
    mlp = train(ModelKind::kMLP, hp, data, Seed{2});
    in = malicious_inputs(data);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

Exec exec_of(const benchmark::State& s) { return s.range(0) ? Exec::kParallel : Exec::kSerial; }
void label(benchmark::State& s) { s.SetLabel(s.range(0) ? "openmp" : "serial"); }

void BM_AttackBatchPgd(benchmark::State& state) {
  const auto& f = fixture();
  AttackSpec spec = AttackSpec::with_defaults(AttackKind::kPgd);
  spec.params.iterations = 20;
  for (auto _ : state)
    benchmark::DoNotOptimize(attack_batch(spec, *f.mlp, f.in.xs, f.in.ys, f.schema, Seed{3}, exec_of(state)));
  label(state);
}

void BM_AttackBatchNes(benchmark::State& state) {
  const auto& f = fixture();
  AttackSpec spec = AttackSpec::with_defaults(AttackKind::kNes);
  spec.params.eps = 0.1;
  spec.params.iterations = 30;
  for (auto _ : state)
    benchmark::DoNotOptimize(attack_batch(spec, *f.mlp, f.in.xs, f.in.ys, f.schema, Seed{3}, exec_of(state)));
  label(state);
}

void BM_ScoreCandidates(benchmark::State& state) {
  Rng rng = make_rng(Seed{4});
  std::vector<Vec> X;
  Vec g;
  for (int i = 0; i < 30; ++i) {
    X.push_back(dirichlet_sample(4, rng));
    g.push_back(X.back()[0] - X.back()[1] * X.back()[2]);
  }
  const GPState gp = gp_fit(X, g, RbfKernel{}, 1e-6, true);
  const auto cands = candidate_set(4, nullptr, 4096, rng);
  AcquisitionParams p;
  p.domain_size = cands.size();
  p.t = 31;
  for (auto _ : state) benchmark::DoNotOptimize(score_candidates(gp, cands, Acquisition::kGPUCB, p, exec_of(state)));
  label(state);
}

void BM_ComputePerturbations(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<AttackSpec> atk = {AttackSpec::with_defaults(AttackKind::kFgsm),
                                 AttackSpec::with_defaults(AttackKind::kDeepFool),
                                 AttackSpec::with_defaults(AttackKind::kJsma)};
  for (auto _ : state)
    benchmark::DoNotOptimize(compute_perturbations(atk, *f.mlp, f.in.xs, f.in.ys, f.schema, Seed{5}, exec_of(state)));
  label(state);
}

void BM_DsrAll(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<AttackSpec> atk = {AttackSpec::with_defaults(AttackKind::kFgsm),
                                 AttackSpec::with_defaults(AttackKind::kBim)};
  for (auto _ : state) benchmark::DoNotOptimize(dsr_all(*f.mlp, f.data, atk, f.schema, Seed{6}, exec_of(state)));
  label(state);
}

}  // namespace

BENCHMARK(BM_AttackBatchPgd)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AttackBatchNes)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreCandidates)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ComputePerturbations)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DsrAll)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
