#include "advkit/ensemble_attacks.hpp"

#include <algorithm>
#include <exception>
#include <limits>

#include "advkit/eval.hpp"

namespace advkit {

namespace {

// Common norm of the base attacks and the largest budget among them.
std::optional<std::pair<Norm, double>> shared_budget(const std::vector<AttackSpec>& attacks) {
  if (attacks.empty()) return std::nullopt;
  const Norm n = attacks.front().params.norm;
  double eps = 0.0;
  for (const auto& a : attacks) {
    if (a.params.norm != n) return std::nullopt;
    eps = std::max(eps, a.params.eps);
  }
  return std::make_pair(n, eps);
}

Vec legalize_combined(const std::vector<AttackSpec>& attacks, const ConstraintSchema& schema,
                      ConstVecView x, ConstVecView cand) {
  if (const auto b = shared_budget(attacks)) return legalize(schema, x, cand, b->first, b->second);
  return legalize(schema, x, cand, Norm::kL2, std::numeric_limits<double>::infinity());
}

Vec combine_deltas(const std::vector<Vec>& deltas, ConstVecView x, ConstVecView w,
                   bool normalized) {
  const std::size_t n = deltas.size();
  if (w.size() != n) throw Error("avg_ea: weight vector length must equal the number of attacks");
  double scale = 1.0 / static_cast<double>(n);
  if (normalized) {
    double s = 0.0;
    for (double v : w) s += v;
    if (!(s > 0)) throw Error("avg_ea: normalized weights need a positive sum");
    scale = 1.0 / s;
  }
  Vec cand(x.begin(), x.end());
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < cand.size(); ++i) cand[i] += scale * w[k] * deltas[k][i];
  return cand;
}

struct BaseRun {
  std::vector<Vec> deltas;
  std::vector<std::string> failures;
  std::size_t queries = 0;
};

BaseRun run_bases(const std::vector<AttackSpec>& attacks, const Model& model, ConstVecView x,
                  int y, const ConstraintSchema& schema, Seed seed) {
  BaseRun b;
  for (std::size_t k = 0; k < attacks.size(); ++k) {
    try {
      const AttackResult r = run_attack(attacks[k], model, x, y, schema, derive(seed, k));
      b.deltas.push_back(sub(r.x_adv, x));
      b.queries += r.queries;
    } catch (const Error& e) {
      b.deltas.emplace_back(x.size(), 0.0);
      b.failures.push_back("attack " + to_string(attacks[k].kind) + " failed: " + e.what());
    }
  }
  return b;
}

AttackResult finish_combined(const std::vector<AttackSpec>& attacks, const Model& model,
                             ConstVecView x, int y, const ConstraintSchema& schema,
                             const std::vector<Vec>& deltas, ConstVecView w, bool normalized,
                             std::size_t base_queries, std::vector<std::string> flags) {
  AttackResult r;
  if (y != kMalicious) {
    r.x_adv.assign(x.begin(), x.end());
    return r;
  }
  r.x_adv = legalize_combined(attacks, schema, x, combine_deltas(deltas, x, w, normalized));
  r.success = model.predict(r.x_adv) == kBenign;
  r.queries = base_queries + 1;
  r.iterations = 1;
  r.flags = std::move(flags);
  fill_norms(r, x);
  return r;
}

}  // namespace

AttackResult avg_ea(const std::vector<AttackSpec>& attacks, ConstVecView w, const Model& model,
                    ConstVecView x, int y, const ConstraintSchema& schema, Seed seed,
                    bool normalized) {
  if (attacks.empty()) throw Error("avg_ea: no attacks");
  if (w.size() != attacks.size())
    throw Error("avg_ea: weight vector length must equal the number of attacks");
  BaseRun b = run_bases(attacks, model, x, y, schema, seed);
  return finish_combined(attacks, model, x, y, schema, b.deltas, w, normalized, b.queries,
                         std::move(b.failures));
}

MaxEaResult max_ea(const std::vector<AttackSpec>& attacks, const Model& model, ConstVecView x,
                   int y, const ConstraintSchema& schema, Seed seed) {
  if (attacks.empty()) throw Error("max_ea: no attacks");
  MaxEaResult out;
  std::size_t queries = 0;
  std::vector<AttackResult> cands;
  for (std::size_t k = 0; k < attacks.size(); ++k) {
    AttackResult r = run_attack(attacks[k], model, x, y, schema, derive(seed, k));
    queries += r.queries;
    out.losses.push_back(model.loss(r.x_adv, y));
    ++queries;
    cands.push_back(std::move(r));
  }
  for (std::size_t k = 1; k < out.losses.size(); ++k)
    if (out.losses[k] > out.losses[out.selected]) out.selected = k;
  out.result = std::move(cands[out.selected]);
  out.result.queries = queries;
  return out;
}

PerturbationCache compute_perturbations(const std::vector<AttackSpec>& attacks, const Model& model,
                                        const std::vector<Vec>& xs, const std::vector<int>& ys,
                                        const ConstraintSchema& schema, Seed seed, Exec exec) {
  if (attacks.empty()) throw Error("compute_perturbations: no attacks");
  if (xs.size() != ys.size()) throw Error("compute_perturbations: xs and ys differ in length");
  PerturbationCache c;
  c.xs = xs;
  c.ys = ys;
  const std::size_t m = xs.size();
  std::vector<BaseRun> runs(m);
  auto one = [&](std::size_t i) {
    runs[i] = run_bases(attacks, model, xs[i], ys[i], schema, derive(seed, i));
  };
  if (exec == Exec::kSerial) {
    for (std::size_t i = 0; i < m; ++i) one(i);
  } else {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
      try {
        one(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(advkit_cache_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  c.deltas.assign(attacks.size(), std::vector<Vec>(m));
  c.failures.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < attacks.size(); ++k) c.deltas[k][i] = std::move(runs[i].deltas[k]);
    c.failures[i] = std::move(runs[i].failures);
    c.queries += runs[i].queries;
  }
  return c;
}

AttackResult combine_cached(const PerturbationCache& cache, std::size_t i, ConstVecView w,
                            const std::vector<AttackSpec>& attacks, const Model& model,
                            const ConstraintSchema& schema, bool normalized) {
  if (i >= cache.xs.size()) throw Error("combine_cached: sample index out of range");
  std::vector<Vec> deltas;
  for (const auto& per_attack : cache.deltas) deltas.push_back(per_attack[i]);
  return finish_combined(attacks, model, cache.xs[i], cache.ys[i], schema, deltas, w, normalized,
                         0, cache.failures[i]);
}

namespace {

// Initial design: the given points truncated to the budget, with n_init
// shrunk to fit what remains.
BayesOptConfig fit_design(BayesOptConfig bo, std::vector<Vec> points) {
  if (bo.budget == 0) throw Error("bayesopt budget must be >= 1");
  if (points.size() > bo.budget) points.resize(bo.budget);
  bo.n_init = std::min(bo.n_init, bo.budget - points.size());
  bo.initial_points = std::move(points);
  if (bo.initial_points.empty() && bo.n_init == 0) bo.n_init = 1;
  return bo;
}

std::vector<Vec> vertices_and_centroid(std::size_t n) {
  std::vector<Vec> pts;
  for (std::size_t k = 0; k < n; ++k) {
    Vec v(n, 0.0);
    v[k] = 1.0;
    pts.push_back(std::move(v));
  }
  if (n > 1) pts.push_back(uniform_weights(n));
  return pts;
}

}  // namespace

AdpEaResult adp_ea(const std::vector<AttackSpec>& attacks, const Model& model,
                   const Dataset& eval_set, const ConstraintSchema& schema,
                   const AdpEaOptions& options, Seed seed) {
  const AttackInputs in = malicious_inputs(eval_set);
  if (in.xs.empty()) throw Error("adp_ea: eval set has no malicious samples");
  const std::size_t n = attacks.size();
  const PerturbationCache cache =
      compute_perturbations(attacks, model, in.xs, in.ys, schema, derive(seed, 1), options.exec);
  const std::size_t m = in.xs.size();

  Vec mean_loss(n, 0.0);
  if (options.objective == AdpObjective::kWeightedLoss)
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < m; ++i)
        mean_loss[k] += model.loss(legalize_combined(attacks, schema, in.xs[i],
                                                     add(in.xs[i], cache.deltas[k][i])),
                                   kMalicious);
      mean_loss[k] /= static_cast<double>(m);
    }

  auto batch_asr = [&](const Vec& p) {
    const Vec w = scaled(p, static_cast<double>(n));
    std::vector<char> ok(m, 0);
    auto one = [&](std::size_t i) {
      ok[i] = combine_cached(cache, i, w, attacks, model, schema).success;
    };
    if (options.exec == Exec::kSerial) {
      for (std::size_t i = 0; i < m; ++i) one(i);
    } else {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i)
        one(static_cast<std::size_t>(i));
    }
    std::size_t s = 0;
    for (char c : ok) s += c;
    return static_cast<double>(s) / static_cast<double>(m);
  };
  SimplexObjective objective = [&](const Vec& p) {
    if (options.objective == AdpObjective::kWeightedLoss) return dot(p, mean_loss);
    return batch_asr(p);
  };

  const BayesOptConfig bo =
      fit_design(options.bo, options.seed_vertices ? vertices_and_centroid(n) : std::vector<Vec>{});
  const BayesOptResult run = bayesopt_run(objective, n, bo, derive(seed, 2));

  AdpEaResult out;
  out.weights = run.best_w;
  out.trace = run.trace;
  const Vec w = scaled(out.weights, static_cast<double>(n));
  for (std::size_t i = 0; i < m; ++i)
    out.results.push_back(combine_cached(cache, i, w, attacks, model, schema));
  out.asr = asr(out.results);
  return out;
}

ModelPtr make_substitute(const std::vector<ModelPtr>& members, ConstVecView weights) {
  if (members.empty()) throw Error("substitute: no members");
  if (weights.size() != members.size()) throw Error("substitute: weights/members size mismatch");
  if (members.size() == 1) return members.front();
  bool all_diff = true, all_tree = true;
  for (const auto& m : members) {
    all_diff = all_diff && m->differentiable();
    all_tree = all_tree && is_tree_kind(m->kind());
  }
  const ModelKind kind =
      all_diff ? ModelKind::kDeepEns : (all_tree ? ModelKind::kTreeEns : ModelKind::kHeteroEns);
  return make_ensemble(members, Vec(weights.begin(), weights.end()), kind);
}

std::vector<AttackResult> tea_craft(const std::vector<ModelPtr>& members, ConstVecView weights,
                                    const AttackSpec& attack, const std::vector<Vec>& xs,
                                    const std::vector<int>& ys, const ConstraintSchema& schema,
                                    Seed seed, Exec exec) {
  const ModelPtr sub = make_substitute(members, weights);
  if (requires_gradients(attack.kind) && !sub->differentiable())
    throw Error("tea: attack " + to_string(attack.kind) +
                " needs gradients but the substitute is query-only");
  return attack_batch(attack, *sub, xs, ys, schema, seed, exec);
}

double transfer_asr(const Model& target, const std::vector<AttackResult>& crafted,
                    std::size_t* queries) {
  if (crafted.empty()) throw Error("transfer_asr: empty batch");
  std::size_t ok = 0;
  for (const auto& r : crafted) ok += target.predict(r.x_adv) == kBenign;
  if (queries) *queries += crafted.size();
  return 100.0 * static_cast<double>(ok) / static_cast<double>(crafted.size());
}

AdpTeaResult adp_tea(const std::vector<ModelPtr>& members, const Model& target,
                     const AttackSpec& attack, const Dataset& data, const ConstraintSchema& schema,
                     const BayesOptConfig& bo, Seed seed, Exec exec) {
  if (bo.budget == 0) throw Error("adp_tea: zero query budget");
  const AttackInputs in = malicious_inputs(data);
  if (in.xs.empty()) throw Error("adp_tea: data has no malicious samples");
  const std::size_t n = members.size();
  AdpTeaResult out;
  SimplexObjective objective = [&](const Vec& w) {
    const auto crafted = tea_craft(members, w, attack, in.xs, in.ys, schema, derive(seed, 1), exec);
    return transfer_asr(target, crafted, &out.target_queries) / 100.0;
  };
  std::vector<Vec> pts;
  if (bo.budget >= 2 && n > 1) pts.push_back(uniform_weights(n));
  const BayesOptResult run = bayesopt_run(objective, n, fit_design(bo, pts), derive(seed, 2));
  out.weights = run.best_w;
  out.asr = 100.0 * run.best_value;
  out.trace = run.trace;
  return out;
}

}  // namespace advkit
