#pragma once

// Ensembles of attack methods (Avg/Max/Adp) and transfer attacks crafted on
// substitute ensembles.

#include <vector>

#include "advkit/attack.hpp"
#include "advkit/bayesopt.hpp"
#include "advkit/data.hpp"

namespace advkit {

// delta_ens = (1/n) sum_i w_i delta_i, with delta_i = A_i(x) - x. With
// `normalized` the weights are rescaled to sum to 1 first. The combined
// vector is remapped and, when every base attack uses the same norm, clipped
// to the largest of their budgets. A base attack that throws contributes
// delta_i = 0 and adds a flag.
AttackResult avg_ea(const std::vector<AttackSpec>& attacks, ConstVecView w, const Model& model,
                    ConstVecView x, int y, const ConstraintSchema& schema, Seed seed,
                    bool normalized = false);

struct MaxEaResult {
  AttackResult result;
  std::size_t selected = 0;
  // loss(model, A_k(x), y) per attack.
  Vec losses;
};
// Candidate with the largest loss; ties go to the lowest attack index.
MaxEaResult max_ea(const std::vector<AttackSpec>& attacks, const Model& model, ConstVecView x,
                   int y, const ConstraintSchema& schema, Seed seed);

// Per-sample base perturbations, computed once and recombined for any
// weight vector. deltas[k][i] belongs to attack k and sample i.
struct PerturbationCache {
  std::vector<Vec> xs;
  std::vector<int> ys;
  std::vector<std::vector<Vec>> deltas;
  std::vector<std::vector<std::string>> failures;
  std::size_t queries = 0;
};
PerturbationCache compute_perturbations(const std::vector<AttackSpec>& attacks, const Model& model,
                                        const std::vector<Vec>& xs, const std::vector<int>& ys,
                                        const ConstraintSchema& schema, Seed seed,
                                        Exec exec = Exec::kParallel);
// Avg-EA result of sample i from the cache; the label check costs one query.
AttackResult combine_cached(const PerturbationCache& cache, std::size_t i, ConstVecView w,
                            const std::vector<AttackSpec>& attacks, const Model& model,
                            const ConstraintSchema& schema, bool normalized = false);

enum class AdpObjective { kAsr, kWeightedLoss };

struct AdpEaOptions {
  BayesOptConfig bo;
  AdpObjective objective = AdpObjective::kAsr;
  // Seed the initial design with the simplex vertices and the centroid.
  bool seed_vertices = true;
  Exec exec = Exec::kParallel;
};

struct AdpEaResult {
  // Simplex weights p; the avg_ea weights are n * p.
  Vec weights;
  double asr = 0.0;
  std::vector<AttackResult> results;
  BayesOptTrace trace;
};

// Searches attack weights on the simplex to maximize the ASR of the combined
// perturbation over the malicious rows of eval_set.
AdpEaResult adp_ea(const std::vector<AttackSpec>& attacks, const Model& model,
                   const Dataset& eval_set, const ConstraintSchema& schema,
                   const AdpEaOptions& options, Seed seed);

// Soft-vote substitute built from members and weights; a single member is
// used directly.
ModelPtr make_substitute(const std::vector<ModelPtr>& members, ConstVecView weights);

// Crafts AEs against the substitute only.
std::vector<AttackResult> tea_craft(const std::vector<ModelPtr>& members, ConstVecView weights,
                                    const AttackSpec& attack, const std::vector<Vec>& xs,
                                    const std::vector<int>& ys, const ConstraintSchema& schema,
                                    Seed seed, Exec exec = Exec::kParallel);

// Percentage of crafted AEs the target labels benign. Costs one target query
// per AE.
double transfer_asr(const Model& target, const std::vector<AttackResult>& crafted,
                    std::size_t* queries = nullptr);

struct AdpTeaResult {
  Vec weights;
  double asr = 0.0;
  BayesOptTrace trace;
  std::size_t target_queries = 0;
};

// BayesOpt over substitute weights; each objective evaluation crafts a batch
// and queries the target once per AE. The budget counts evaluations.
AdpTeaResult adp_tea(const std::vector<ModelPtr>& members, const Model& target,
                     const AttackSpec& attack, const Dataset& data, const ConstraintSchema& schema,
                     const BayesOptConfig& bo, Seed seed, Exec exec = Exec::kParallel);

}  // namespace advkit
