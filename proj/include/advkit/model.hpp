#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "advkit/core.hpp"
#include "advkit/data.hpp"
#include "json.hpp"

namespace advkit {

enum class ModelKind {
  kLR,
  kLinearSVM,
  kMLP,
  kDecisionTree,
  kRandomForest,
  kGradBoostTrees,
  kDeepEns,
  kTreeEns,
  kHeteroEns,
};

enum class Capability { kDifferentiable, kQueryOnly };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);
Capability capability_of(ModelKind kind);
bool is_tree_kind(ModelKind kind);

// Log-loss floor for probabilities.
inline constexpr double kProbFloor = 1e-12;

using Logits = std::array<double, 2>;
using LogitGradients = std::array<Vec, 2>;

// A trained binary classifier. Models are immutable after construction and
// safe to share between threads. Public calls validate the input dimension
// and forward to the do_* hooks.
class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  virtual std::size_t dim() const = 0;
  Capability capability() const { return capability_of(kind()); }
  bool differentiable() const { return capability() == Capability::kDifferentiable; }

  Proba predict_proba(ConstVecView x) const;
  // Argmax of predict_proba; ties go to benign.
  int predict(ConstVecView x) const;
  double loss(ConstVecView x, int y) const;

  // Differentiable models only.
  Logits logits(ConstVecView x) const;
  LogitGradients logit_gradients(ConstVecView x) const;
  Vec input_gradient(ConstVecView x, int y) const;
  // d p_malicious / dx.
  Vec proba_gradient(ConstVecView x) const;

  virtual nlohmann::json params_json() const = 0;

 protected:
  virtual Proba do_predict_proba(ConstVecView x) const = 0;
  // Default: cross-entropy of predict_proba with the probability floor.
  virtual double do_loss(ConstVecView x, int y) const;
  // Default for differentiable models: log of the floored probabilities.
  virtual Logits do_logits(ConstVecView x) const;
  virtual LogitGradients do_logit_gradients(ConstVecView x) const;
  // Default: cross-entropy gradient through the softmax of do_logits.
  virtual Vec do_input_gradient(ConstVecView x, int y) const;

 private:
  void check_dim(ConstVecView x) const;
  void require_differentiable(const char* what) const;
};

using ModelPtr = std::shared_ptr<const Model>;

// Cross-entropy with probability floor.
double cross_entropy(const Proba& p, int y);

// Training hyperparameters; each kind reads the fields it needs.
struct HyperParams {
  // Gradient-trained kinds (LR, LinearSVM, MLP).
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double l2 = 1e-4;
  std::vector<std::size_t> hidden = {16};
  // Trees.
  std::size_t max_depth = 6;
  std::size_t min_samples_leaf = 1;
  std::size_t n_trees = 25;
  std::size_t max_features = 0;  // 0: sqrt(d) for forests, d for single trees
  // Gradient boosting.
  std::size_t n_estimators = 60;
  double shrinkage = 0.2;
  std::size_t boost_depth = 3;

  nlohmann::json to_json() const;
  static HyperParams from_json(const nlohmann::json& j);
};

// Trains a fresh model. Deterministic given the seed. Per-sample weights may
// be empty (uniform). Throws on a
// single-class training set or a non-finite training loss.
ModelPtr train(ModelKind kind, const HyperParams& hp, const Dataset& data, Seed seed);
ModelPtr train(ModelKind kind, const HyperParams& hp, const std::vector<Sample>& samples,
               const Vec& weights, Seed seed);

// Continues training from `model` for hp.epochs on the given data. Gradient
// kinds warm-start from their current parameters; tree kinds are retrained
// from scratch.
ModelPtr fine_tune(const Model& model, const HyperParams& hp, const std::vector<Sample>& samples,
                   const Vec& weights, Seed seed);

// Soft-vote ensemble. DeepEns requires differentiable members, TreeEns tree
// members; HeteroEns accepts anything.
ModelPtr make_ensemble(std::vector<ModelPtr> members, Vec weights, ModelKind kind);

// Versioned JSON serialization.
inline constexpr int kModelFormatVersion = 1;
nlohmann::json model_to_json(const Model& model);
ModelPtr model_from_json(const nlohmann::json& j);
void save_model(const Model& model, const std::string& path,
                const nlohmann::json& provenance = nlohmann::json::object());
ModelPtr load_model(const std::string& path, nlohmann::json* provenance = nullptr);

}  // namespace advkit
