#pragma once

// Concrete model families. Most callers only need model.hpp; these types are
// exposed for hand-built models and tests.

#include <vector>

#include "advkit/model.hpp"

namespace advkit {

class LogisticRegression final : public Model {
 public:
  LogisticRegression(Vec w, double b) : w_(std::move(w)), b_(b) {}
  ModelKind kind() const override { return ModelKind::kLR; }
  std::size_t dim() const override { return w_.size(); }
  const Vec& weights() const { return w_; }
  double bias() const { return b_; }
  double decision(ConstVecView x) const { return dot(w_, x) + b_; }
  nlohmann::json params_json() const override;

 protected:
  Proba do_predict_proba(ConstVecView x) const override;
  Logits do_logits(ConstVecView x) const override;
  LogitGradients do_logit_gradients(ConstVecView x) const override;

 private:
  Vec w_;
  double b_;
};

// Linear SVM; probabilities are the logistic of the margin, loss is hinge.
class LinearSvm final : public Model {
 public:
  LinearSvm(Vec w, double b) : w_(std::move(w)), b_(b) {}
  ModelKind kind() const override { return ModelKind::kLinearSVM; }
  std::size_t dim() const override { return w_.size(); }
  const Vec& weights() const { return w_; }
  double bias() const { return b_; }
  double decision(ConstVecView x) const { return dot(w_, x) + b_; }
  nlohmann::json params_json() const override;

 protected:
  Proba do_predict_proba(ConstVecView x) const override;
  double do_loss(ConstVecView x, int y) const override;
  Logits do_logits(ConstVecView x) const override;
  LogitGradients do_logit_gradients(ConstVecView x) const override;
  Vec do_input_gradient(ConstVecView x, int y) const override;

 private:
  Vec w_;
  double b_;
};

struct DenseLayer {
  std::size_t in = 0, out = 0;
  Vec weight;  // row-major out x in
  Vec bias;    // out
};

// Fully connected ReLU network with a 2-way softmax head.
class Mlp final : public Model {
 public:
  explicit Mlp(std::vector<DenseLayer> layers);
  ModelKind kind() const override { return ModelKind::kMLP; }
  std::size_t dim() const override { return layers_.front().in; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  nlohmann::json params_json() const override;

  struct Forward {
    std::vector<Vec> pre;   // pre-activations per layer
    std::vector<Vec> post;  // post[0] = input, post[k+1] = activation of layer k
  };
  Forward forward(ConstVecView x) const;
  // Gradients of parameters for upstream gradient g on the logits.
  void backward(const Forward& fw, ConstVecView g_logits, std::vector<DenseLayer>* param_grads,
                Vec* input_grad) const;

 protected:
  Proba do_predict_proba(ConstVecView x) const override;
  Logits do_logits(ConstVecView x) const override;
  LogitGradients do_logit_gradients(ConstVecView x) const override;

 private:
  std::vector<DenseLayer> layers_;
};

struct TreeNode {
  // Internal nodes: feature/threshold and child indices (x[feature] <= threshold goes left).
  // Leaves: left == right == -1 and `value` holds the leaf output.
  std::size_t feature = 0;
  double threshold = 0;
  int left = -1;
  int right = -1;
  double value = 0;
  bool is_leaf() const { return left < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double evaluate(ConstVecView x) const;
  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);
};

// Classification tree whose leaves store P(malicious).
class DecisionTree final : public Model {
 public:
  DecisionTree(std::size_t dim, Tree tree) : dim_(dim), tree_(std::move(tree)) {}
  ModelKind kind() const override { return ModelKind::kDecisionTree; }
  std::size_t dim() const override { return dim_; }
  const Tree& tree() const { return tree_; }
  nlohmann::json params_json() const override;

 protected:
  Proba do_predict_proba(ConstVecView x) const override;

 private:
  std::size_t dim_;
  Tree tree_;
};

class RandomForest final : public Model {
 public:
  RandomForest(std::size_t dim, std::vector<Tree> trees) : dim_(dim), trees_(std::move(trees)) {}
  ModelKind kind() const override { return ModelKind::kRandomForest; }
  std::size_t dim() const override { return dim_; }
  const std::vector<Tree>& trees() const { return trees_; }
  nlohmann::json params_json() const override;

 protected:
  Proba do_predict_proba(ConstVecView x) const override;

 private:
  std::size_t dim_;
  std::vector<Tree> trees_;
};

// Additive logistic model: P(malicious) = sigmoid(base + shrinkage * sum of tree outputs).
class GradientBoosting final : public Model {
 public:
  GradientBoosting(std::size_t dim, double base, double shrinkage, std::vector<Tree> trees)
      : dim_(dim), base_(base), shrinkage_(shrinkage), trees_(std::move(trees)) {}
  ModelKind kind() const override { return ModelKind::kGradBoostTrees; }
  std::size_t dim() const override { return dim_; }
  nlohmann::json params_json() const override;
  double raw_score(ConstVecView x) const;

 protected:
  Proba do_predict_proba(ConstVecView x) const override;

 private:
  std::size_t dim_;
  double base_;
  double shrinkage_;
  std::vector<Tree> trees_;
};

class Ensemble final : public Model {
 public:
  Ensemble(ModelKind kind, std::vector<ModelPtr> members, Vec weights);
  ModelKind kind() const override { return kind_; }
  std::size_t dim() const override { return members_.front()->dim(); }
  const std::vector<ModelPtr>& members() const { return members_; }
  const Vec& member_weights() const { return weights_; }
  nlohmann::json params_json() const override;

 protected:
  Proba do_predict_proba(ConstVecView x) const override;
  LogitGradients do_logit_gradients(ConstVecView x) const override;

 private:
  ModelKind kind_;
  std::vector<ModelPtr> members_;
  Vec weights_;
};

// Tree learners, exposed for the boosting and forest trainers and for tests.
struct TreeLearnerOptions {
  std::size_t max_depth = 6;
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0 = all features
};

// Gini classification tree with Laplace-smoothed leaf probabilities.
Tree fit_classification_tree(const std::vector<Sample>& samples, const Vec& weights,
                             const std::vector<std::size_t>& rows,
                             const TreeLearnerOptions& opt, Rng& rng);

// Squared-error regression tree on targets; leaf value is
// sum(w*num)/sum(w*den) over the leaf (Newton step for boosting).
Tree fit_regression_tree(const std::vector<Sample>& samples, const Vec& weights,
                         const Vec& numerators, const Vec& denominators,
                         const TreeLearnerOptions& opt);

}  // namespace advkit
