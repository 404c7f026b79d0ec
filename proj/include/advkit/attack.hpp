#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "advkit/constraints.hpp"
#include "advkit/core.hpp"
#include "advkit/model.hpp"

namespace advkit {

enum class AttackKind {
  kFgsm,
  kPgd,
  kBim,
  kCw,
  kDeepFool,
  kJsma,
  kZoo,
  kNes,
  kZosgd,
  kZoAdamm,
  kBoundary,
  kHsja,
};

AttackKind parse_attack_kind(const std::string& name);
std::string to_string(AttackKind kind);
const std::vector<std::string>& attack_names();
bool requires_gradients(AttackKind kind);

enum class BimVariant { kA, kB };

struct AttackParams {
  Norm norm = Norm::kLinf;
  double eps = 0.05;
  // 0 selects the per-attack default.
  double step = 0.0;
  std::size_t iterations = 40;

  double cw_c = 1.0;
  double cw_kappa = 0.0;
  double overshoot = 0.02;
  BimVariant bim_variant = BimVariant::kA;
  double jsma_theta = 0.1;

  // Gradient-free attacks.
  double hinge_k = 0.0;
  double sigma = 1e-3;
  double h = 1e-4;
  std::size_t population = 20;
  std::size_t coords_per_iter = 8;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  std::size_t query_budget = 2000;

  // Decision-based attacks.
  std::size_t init_budget = 200;
  double orth_step = 0.1;
  double src_step = 0.05;
  std::size_t hsja_max_directions = 400;
  double binary_tolerance = 1e-6;
  std::optional<Vec> start;

  nlohmann::json to_json() const;
  // Starts from `base` and overrides the fields present in j.
  static AttackParams from_json(const nlohmann::json& j, AttackParams base);
};

// Budget conventions: l1 (eps = 1) for JSMA, DeepFool, BA and HSJA, l_inf
// (eps = 0.05) for the rest.
AttackParams default_params(AttackKind kind);

struct AttackResult {
  Vec x_adv;
  bool success = false;
  std::size_t queries = 0;
  double l1 = 0, l2 = 0, linf = 0;
  std::size_t iterations = 0;
  // Per-iteration diagnostic (loss or distance, attack-specific).
  std::vector<double> trace;
  std::vector<std::string> flags;

  bool has_flag(const std::string& f) const;
};

struct AttackSpec {
  AttackKind kind;
  AttackParams params;
  static AttackSpec with_defaults(AttackKind kind) { return {kind, default_params(kind)}; }
};

// Runs one attack on (x, y). The target class is benign: inputs with y = 0
// are returned unchanged with success = false and no queries.
AttackResult run_attack(const AttackSpec& spec, const Model& model, ConstVecView x, int y,
                        const ConstraintSchema& schema, Seed seed);

// Query-counting view of a model, one count per model call. When a budget
// is set, calls past it throw QueryBudgetExhausted before reaching the model.
struct QueryBudgetExhausted {};

class QueryCounter {
 public:
  explicit QueryCounter(const Model& model,
                        std::size_t budget = std::numeric_limits<std::size_t>::max())
      : model_(model), budget_(budget) {}

  const Model& model() const { return model_; }
  std::size_t used() const { return used_; }
  std::size_t remaining() const { return budget_ - used_; }

  Proba proba(ConstVecView x);
  int label(ConstVecView x);
  Logits logits(ConstVecView x);
  LogitGradients logit_gradients(ConstVecView x);
  Vec loss_gradient(ConstVecView x, int y);
  double loss(ConstVecView x, int y);

 private:
  void charge();
  const Model& model_;
  std::size_t budget_;
  std::size_t used_ = 0;
};

// Shared tail of every attack: legalize the candidate under the budget,
// re-check the label and fill the result.
AttackResult finish_attack(QueryCounter& oracle, const ConstraintSchema& schema, ConstVecView x,
                           ConstVecView candidate, const AttackParams& params,
                           std::size_t iterations, std::vector<double> trace = {},
                           std::vector<std::string> flags = {});

void fill_norms(AttackResult& r, ConstVecView x);

// Attacks every row of xs; row i uses seed derive(seed, i). Serial and
// parallel paths give identical results.
std::vector<AttackResult> attack_batch(const AttackSpec& spec, const Model& model,
                                       const std::vector<Vec>& xs, const std::vector<int>& ys,
                                       const ConstraintSchema& schema, Seed seed,
                                       Exec exec = Exec::kParallel);

}  // namespace advkit
