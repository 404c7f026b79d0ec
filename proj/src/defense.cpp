#include "advkit/defense.hpp"

#include <algorithm>
#include <cmath>

#include "advkit/ensemble_attacks.hpp"
#include "advkit/eval.hpp"

namespace advkit {

using nlohmann::json;

namespace {

void check_config(const AtConfig& cfg) {
  if (!(cfg.adv_fraction >= 0 && cfg.adv_fraction <= 1))
    throw Error("adversarial training: adv_fraction must lie in [0, 1]");
}

ModelPtr pretrain(ModelKind kind, const Dataset& train_set, const AtConfig& cfg, Seed seed) {
  if (cfg.initial) {
    if (cfg.initial->kind() != kind) throw Error("adversarial training: initial model kind mismatch");
    return cfg.initial;
  }
  return train(kind, cfg.hp, train_set, derive(seed, 0));
}

// The spec actually run against `model`, after the query-only fallback.
const AttackSpec& applicable(const AttackSpec& spec, const Model& model, const AtConfig& cfg) {
  if (!requires_gradients(spec.kind) || model.differentiable()) return spec;
  if (!cfg.zo_fallback)
    throw Error("adversarial training: attack " + to_string(spec.kind) +
                " needs gradients and " + to_string(model.kind()) +
                " is query-only (enable zo_fallback)");
  return cfg.fallback;
}

// Malicious rows attacked this round.
AttackInputs round_inputs(const AttackInputs& all, const AtConfig& cfg, Seed seed) {
  if (cfg.max_adv == 0 || cfg.max_adv >= all.xs.size()) return all;
  std::vector<std::size_t> idx(all.xs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng = make_rng(seed);
  for (std::size_t i = 0; i < cfg.max_adv; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(cfg.max_adv);
  std::sort(idx.begin(), idx.end());
  AttackInputs out;
  for (std::size_t i : idx) {
    out.xs.push_back(all.xs[i]);
    out.ys.push_back(all.ys[i]);
  }
  return out;
}

struct Mixture {
  std::vector<Sample> samples;
  Vec weights;
};

Mixture clean_part(const Dataset& d, double share) {
  Mixture m;
  const double w = share / static_cast<double>(d.size());
  for (const auto& s : d.samples) {
    m.samples.push_back(s);
    m.weights.push_back(w);
  }
  return m;
}

void add_adversarial(Mixture& m, const std::vector<Vec>& xs, double share) {
  if (xs.empty() || share <= 0) return;
  const double w = share / static_cast<double>(xs.size());
  for (const auto& x : xs) {
    m.samples.push_back({x, kMalicious});
    m.weights.push_back(w);
  }
}

ModelPtr update(const ModelPtr& model, const Mixture& mix, const AtConfig& cfg, Seed seed) {
  if (model->differentiable()) {
    HyperParams hp = cfg.hp;
    hp.epochs = cfg.finetune_epochs;
    return fine_tune(*model, hp, mix.samples, mix.weights, seed);
  }
  return train(model->kind(), cfg.hp, mix.samples, mix.weights, seed);
}

std::vector<Vec> craft(const AttackSpec& spec, const Model& model, const AttackInputs& in,
                       const ConstraintSchema& schema, const AtConfig& cfg, Seed seed) {
  const auto res = attack_batch(applicable(spec, model, cfg), model, in.xs, in.ys, schema, seed,
                                cfg.exec);
  std::vector<Vec> out;
  out.reserve(res.size());
  for (const auto& r : res) out.push_back(r.x_adv);
  return out;
}

double mean_loss(const Model& model, const std::vector<Vec>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : xs) s += model.loss(x, kMalicious);
  return s / static_cast<double>(xs.size());
}

json attacks_json(const std::vector<AttackSpec>& attacks) {
  json a = json::array();
  for (const auto& s : attacks) a.push_back({{"kind", to_string(s.kind)}, {"params", s.params.to_json()}});
  return a;
}

json base_provenance(const std::string& method, ModelKind kind, const AtConfig& cfg, Seed seed) {
  return {{"defense", method},
          {"kind", to_string(kind)},
          {"epochs", cfg.epochs},
          {"finetune_epochs", cfg.finetune_epochs},
          {"adv_fraction", cfg.adv_fraction},
          {"max_adv", cfg.max_adv},
          {"hyperparams", cfg.hp.to_json()},
          {"seed", seed.value}};
}

Vec simplex_weights(ConstVecView w) {
  double s = 0.0;
  for (double v : w) {
    if (!(v >= 0)) throw Error("avg_at: weights must be nonnegative");
    s += v;
  }
  if (!(s > 0)) throw Error("avg_at: weights must have a positive sum");
  Vec out(w.begin(), w.end());
  for (double& v : out) v /= s;
  return out;
}

}  // namespace

double weighted_adversarial_loss(const Model& model, const std::vector<std::vector<Vec>>& aes,
                                 ConstVecView w) {
  if (aes.size() != w.size()) throw Error("weighted_adversarial_loss: size mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < aes.size(); ++k) total += w[k] * mean_loss(model, aes[k]);
  return total;
}

AtResult avg_at(ModelKind kind, const Dataset& train_set, const std::vector<AttackSpec>& attacks,
                ConstVecView w_t, const ConstraintSchema& schema, const AtConfig& cfg, Seed seed) {
  check_config(cfg);
  if (attacks.empty()) throw Error("avg_at: no attacks");
  if (w_t.size() != attacks.size()) throw Error("avg_at: weights/attacks size mismatch");
  const Vec w = simplex_weights(w_t);
  const AttackInputs all = malicious_inputs(train_set);
  if (all.xs.empty()) throw Error("adversarial training: no malicious training rows");

  AtResult res;
  res.model = pretrain(kind, train_set, cfg, seed);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const Seed es = derive(seed, 10 + e);
    const AttackInputs in = round_inputs(all, cfg, derive(es, 1));
    Mixture mix = clean_part(train_set, 1.0 - cfg.adv_fraction);
    AtRound round;
    round.attack_loss.assign(attacks.size(), 0.0);
    for (std::size_t k = 0; k < attacks.size(); ++k) {
      if (w[k] == 0) continue;
      const auto aes = craft(attacks[k], *res.model, in, schema, cfg, derive(es, 2));
      round.attack_loss[k] = mean_loss(*res.model, aes);
      add_adversarial(mix, aes, cfg.adv_fraction * w[k]);
    }
    res.rounds.push_back(std::move(round));
    res.model = update(res.model, mix, cfg, derive(es, 3));
  }
  res.provenance = base_provenance("avg_at", kind, cfg, seed);
  res.provenance["attacks"] = attacks_json(attacks);
  res.provenance["weights"] = w;
  return res;
}

AtResult nat(ModelKind kind, const Dataset& train_set, const AttackSpec& attack,
             const ConstraintSchema& schema, const AtConfig& cfg, Seed seed) {
  AtResult r = avg_at(kind, train_set, {attack}, Vec{1.0}, schema, cfg, seed);
  r.provenance["defense"] = "nat";
  return r;
}

AtResult max_at(ModelKind kind, const Dataset& train_set, const std::vector<AttackSpec>& attacks,
                const ConstraintSchema& schema, const AtConfig& cfg, Seed seed) {
  check_config(cfg);
  if (attacks.empty()) throw Error("max_at: no attacks");
  const AttackInputs all = malicious_inputs(train_set);
  if (all.xs.empty()) throw Error("adversarial training: no malicious training rows");

  AtResult res;
  res.model = pretrain(kind, train_set, cfg, seed);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const Seed es = derive(seed, 10 + e);
    const AttackInputs in = round_inputs(all, cfg, derive(es, 1));
    std::vector<std::vector<Vec>> aes;
    AtRound round;
    for (const auto& spec : attacks) {
      aes.push_back(craft(spec, *res.model, in, schema, cfg, derive(es, 2)));
      round.attack_loss.push_back(mean_loss(*res.model, aes.back()));
    }
    std::vector<Vec> chosen;
    for (std::size_t i = 0; i < in.xs.size(); ++i) {
      Vec losses;
      for (std::size_t k = 0; k < attacks.size(); ++k)
        losses.push_back(res.model->loss(aes[k][i], kMalicious));
      std::size_t best = 0;
      for (std::size_t k = 1; k < losses.size(); ++k)
        if (losses[k] > losses[best]) best = k;
      round.row_losses.push_back(std::move(losses));
      round.selected.push_back(best);
      chosen.push_back(aes[best][i]);
    }
    Mixture mix = clean_part(train_set, 1.0 - cfg.adv_fraction);
    add_adversarial(mix, chosen, cfg.adv_fraction);
    res.rounds.push_back(std::move(round));
    res.model = update(res.model, mix, cfg, derive(es, 3));
  }
  res.provenance = base_provenance("max_at", kind, cfg, seed);
  res.provenance["attacks"] = attacks_json(attacks);
  return res;
}

double dsr_all_from_bools(const std::vector<std::vector<bool>>& b) {
  if (b.empty()) throw Error("dsr_all: empty attack list");
  const std::size_t n = b.front().size();
  for (const auto& col : b)
    if (col.size() != n) throw Error("dsr_all: ragged result matrix");
  if (n == 0) throw Error("dsr_all: empty dataset");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool all = true;
    for (const auto& col : b) all = all && col[i];
    ok += all;
  }
  return static_cast<double>(ok) / static_cast<double>(n);
}

double dsr_all(const Model& model, const Dataset& data, const std::vector<AttackSpec>& attacks,
               const ConstraintSchema& schema, Seed seed, Exec exec) {
  if (attacks.empty()) throw Error("dsr_all: empty attack list");
  if (data.empty()) throw Error("dsr_all: empty dataset");
  std::vector<Vec> xs;
  std::vector<int> ys;
  for (const auto& s : data.samples) {
    xs.push_back(s.features);
    ys.push_back(s.label);
  }
  std::vector<std::vector<bool>> b;
  for (std::size_t k = 0; k < attacks.size(); ++k) {
    const auto res = attack_batch(attacks[k], model, xs, ys, schema, derive(seed, k), exec);
    std::vector<bool> col(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) col[i] = model.predict(res[i].x_adv) == ys[i];
    b.push_back(std::move(col));
  }
  return dsr_all_from_bools(b);
}

RAtResult r_at(ModelKind kind, const Dataset& train_set, const Dataset& val,
               const std::vector<AttackSpec>& attacks, const ConstraintSchema& schema,
               const AtConfig& cfg, const RAtOptions& options, Seed seed) {
  if (attacks.empty()) throw Error("r_at: no attacks");
  const std::size_t n = attacks.size();
  std::vector<Vec> pts;
  if (options.seed_vertices) {
    for (std::size_t k = 0; k < n; ++k) {
      Vec v(n, 0.0);
      v[k] = 1.0;
      pts.push_back(std::move(v));
    }
    if (n > 1) pts.push_back(uniform_weights(n));
  }
  BayesOptConfig bo = options.bo;
  bo.initial_points = pts;
  if (bo.budget < pts.size() + bo.n_init)
    throw Error("r_at: budget " + std::to_string(bo.budget) + " is smaller than the initial design (" +
                std::to_string(pts.size() + bo.n_init) + ")");

  AtConfig eval_cfg = cfg;
  eval_cfg.initial = pretrain(kind, train_set, cfg, seed);
  eval_cfg.epochs = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(options.eval_epoch_fraction * cfg.epochs)));
  SimplexObjective objective = [&](const Vec& w) {
    const AtResult m = avg_at(kind, train_set, attacks, w, schema, eval_cfg, seed);
    return dsr_all(*m.model, val, attacks, schema, derive(seed, 99), cfg.exec);
  };
  const BayesOptResult run = bayesopt_run(objective, n, bo, derive(seed, 98));

  RAtResult out;
  out.weights = run.best_w;
  out.trace = run.trace;
  AtConfig final_cfg = cfg;
  final_cfg.initial = eval_cfg.initial;
  const AtResult fin = avg_at(kind, train_set, attacks, out.weights, schema, final_cfg, seed);
  out.model = fin.model;
  out.provenance = base_provenance("r_at", kind, cfg, seed);
  out.provenance["attacks"] = attacks_json(attacks);
  out.provenance["weights"] = out.weights;
  out.provenance["bayesopt_budget"] = bo.budget;
  out.provenance["eval_epochs"] = eval_cfg.epochs;
  out.provenance["best_val_dsr_all"] = run.best_value;
  return out;
}

AtResult te_at(ModelKind kind, const Dataset& train_set, const std::vector<ModelPtr>& substitutes,
               ConstVecView weights, const AttackSpec& attack, const ConstraintSchema& schema,
               const AtConfig& cfg, Seed seed) {
  check_config(cfg);
  const AttackInputs in = malicious_inputs(train_set);
  if (in.xs.empty()) throw Error("adversarial training: no malicious training rows");
  const auto crafted = tea_craft(substitutes, weights, attack, in.xs, in.ys, schema,
                                 derive(seed, 1), cfg.exec);
  AtResult res;
  for (const auto& r : crafted) res.transferred.push_back(r.x_adv);
  Mixture mix = clean_part(train_set, 1.0 - cfg.adv_fraction);
  add_adversarial(mix, res.transferred, cfg.adv_fraction);
  res.model = train(kind, cfg.hp, mix.samples, mix.weights, derive(seed, 2));
  res.provenance = base_provenance("te_at", kind, cfg, seed);
  res.provenance["attacks"] = attacks_json({attack});
  res.provenance["substitutes"] = substitutes.size();
  res.provenance["substitute_weights"] = Vec(weights.begin(), weights.end());
  return res;
}

}  // namespace advkit
