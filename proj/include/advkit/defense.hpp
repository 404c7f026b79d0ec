#pragma once

// Adversarial-training defenses and the all-attacks defense rate.

#include <vector>

#include "advkit/attack.hpp"
#include "advkit/bayesopt.hpp"
#include "advkit/data.hpp"

namespace advkit {

struct AtConfig {
  // Clean pre-training.
  HyperParams hp;
  // Adversarial rounds; AEs are regenerated on the current model each round.
  std::size_t epochs = 5;
  // SGD epochs per round for gradient-trained kinds (trees retrain instead).
  std::size_t finetune_epochs = 20;
  // Share of the training weight carried by adversarial rows.
  double adv_fraction = 0.5;
  // Malicious rows attacked per round; 0 attacks all of them.
  std::size_t max_adv = 0;
  // Substitute for gradient attacks when the trained kind is query-only.
  bool zo_fallback = true;
  AttackSpec fallback = AttackSpec::with_defaults(AttackKind::kNes);
  // Pre-trained starting point; trained from hp when null.
  ModelPtr initial;
  Exec exec = Exec::kParallel;
};

struct AtRound {
  // Mean loss of the current model on each attack's AEs.
  Vec attack_loss;
  // Max-AT: per attacked row, the loss under each attack and the chosen index.
  std::vector<Vec> row_losses;
  std::vector<std::size_t> selected;
};

struct AtResult {
  ModelPtr model;
  std::vector<AtRound> rounds;
  // Transferred AEs (TE-AT only).
  std::vector<Vec> transferred;
  nlohmann::json provenance;
};

AtResult nat(ModelKind kind, const Dataset& train, const AttackSpec& attack,
             const ConstraintSchema& schema, const AtConfig& cfg, Seed seed);

// Adversarial rows of attack i carry weight proportional to w_t[i]; attacks
// with zero weight are not run.
AtResult avg_at(ModelKind kind, const Dataset& train, const std::vector<AttackSpec>& attacks,
                ConstVecView w_t, const ConstraintSchema& schema, const AtConfig& cfg, Seed seed);

// Each attacked row contributes only its highest-loss AE; ties go to the
// lowest attack index.
AtResult max_at(ModelKind kind, const Dataset& train, const std::vector<AttackSpec>& attacks,
                const ConstraintSchema& schema, const AtConfig& cfg, Seed seed);

// sum_i w_i * mean loss of the model on the AEs of attack i.
double weighted_adversarial_loss(const Model& model, const std::vector<std::vector<Vec>>& aes,
                                 ConstVecView w);

// Fraction of rows where every column of b (one column per attack) is true.
double dsr_all_from_bools(const std::vector<std::vector<bool>>& b);

// b[k][i] = (prediction on the AE of attack k for row i == label); benign
// rows pass through unperturbed. Returns a fraction in [0, 1].
double dsr_all(const Model& model, const Dataset& data, const std::vector<AttackSpec>& attacks,
               const ConstraintSchema& schema, Seed seed, Exec exec = Exec::kParallel);

struct RAtOptions {
  BayesOptConfig bo;
  // Share of cfg.epochs used inside each BayesOpt evaluation.
  double eval_epoch_fraction = 1.0;
  bool seed_vertices = true;
};

struct RAtResult {
  ModelPtr model;
  Vec weights;
  BayesOptTrace trace;
  nlohmann::json provenance;
};

// BayesOpt over the Avg-AT weights, scoring each candidate by dsr_all on
// val; the returned model is retrained with the full configuration at w*.
RAtResult r_at(ModelKind kind, const Dataset& train, const Dataset& val,
               const std::vector<AttackSpec>& attacks, const ConstraintSchema& schema,
               const AtConfig& cfg, const RAtOptions& options, Seed seed);

// AEs are crafted once against the fixed substitute ensemble and mixed with
// the clean rows; the trained model is never attacked.
AtResult te_at(ModelKind kind, const Dataset& train, const std::vector<ModelPtr>& substitutes,
               ConstVecView weights, const AttackSpec& attack, const ConstraintSchema& schema,
               const AtConfig& cfg, Seed seed);

}  // namespace advkit
