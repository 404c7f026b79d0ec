#include <algorithm>
#include <numeric>

#include "advkit/model.hpp"
#include "advkit/models.hpp"

namespace advkit {

using nlohmann::json;

json HyperParams::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"l2", l2},
          {"hidden", hidden},
          {"max_depth", max_depth},
          {"min_samples_leaf", min_samples_leaf},
          {"n_trees", n_trees},
          {"max_features", max_features},
          {"n_estimators", n_estimators},
          {"shrinkage", shrinkage},
          {"boost_depth", boost_depth}};
}

HyperParams HyperParams::from_json(const json& j) {
  static const char* kKnown[] = {"epochs",     "batch_size", "learning_rate", "momentum",
                                 "l2",         "hidden",     "max_depth",     "min_samples_leaf",
                                 "n_trees",    "max_features", "n_estimators", "shrinkage",
                                 "boost_depth"};
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown))
      throw Error("hyperparams: unknown field '" + key + "'");
  HyperParams hp;
  hp.epochs = j.value("epochs", hp.epochs);
  hp.batch_size = j.value("batch_size", hp.batch_size);
  hp.learning_rate = j.value("learning_rate", hp.learning_rate);
  hp.momentum = j.value("momentum", hp.momentum);
  hp.l2 = j.value("l2", hp.l2);
  hp.hidden = j.value("hidden", hp.hidden);
  hp.max_depth = j.value("max_depth", hp.max_depth);
  hp.min_samples_leaf = j.value("min_samples_leaf", hp.min_samples_leaf);
  hp.n_trees = j.value("n_trees", hp.n_trees);
  hp.max_features = j.value("max_features", hp.max_features);
  hp.n_estimators = j.value("n_estimators", hp.n_estimators);
  hp.shrinkage = j.value("shrinkage", hp.shrinkage);
  hp.boost_depth = j.value("boost_depth", hp.boost_depth);
  return hp;
}

namespace {

// Weights normalized to mean 1; empty input means uniform.
Vec normalized_weights(const std::vector<Sample>& samples, const Vec& weights) {
  if (weights.empty()) return Vec(samples.size(), 1.0);
  if (weights.size() != samples.size()) throw Error("train: weights/samples size mismatch");
  double s = 0;
  for (double w : weights) {
    if (!(w >= 0) || !std::isfinite(w)) throw Error("train: invalid sample weight");
    s += w;
  }
  if (s <= 0) throw Error("train: sample weights sum to zero");
  Vec out(weights.size());
  const double scale = static_cast<double>(weights.size()) / s;
  for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] * scale;
  return out;
}

void check_training_set(const std::vector<Sample>& samples, const Vec& w) {
  if (samples.empty()) throw Error("train: empty training set");
  const std::size_t d = samples.front().features.size();
  double w0 = 0, w1 = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != d) throw Error("train: inconsistent sample dimension");
    (samples[i].label == 1 ? w1 : w0) += w[i];
  }
  if (w0 <= 0 || w1 <= 0) throw Error("train: training set must contain both classes");
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  return idx;
}

enum class LinearLoss { kLogistic, kHinge };

std::pair<Vec, double> sgd_linear(const std::vector<Sample>& samples, const Vec& w_samples,
                                  const HyperParams& hp, LinearLoss loss_kind, Vec w, double b,
                                  Rng& rng) {
  const std::size_t d = w.size();
  Vec vel_w(d, 0.0);
  double vel_b = 0;
  const std::size_t bs = std::max<std::size_t>(1, hp.batch_size);
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    const auto order = shuffled_indices(samples.size(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      Vec gw(d, 0.0);
      double gb = 0, wsum = 0;
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = samples[order[k]];
        const double sw = w_samples[order[k]];
        const double z = dot(w, s.features) + b;
        double coef = 0;
        if (loss_kind == LinearLoss::kLogistic) {
          const double p = sigmoid(z);
          coef = p - s.label;
          epoch_loss += sw * cross_entropy({1 - p, p}, s.label);
        } else {
          const double sy = s.label == 1 ? 1.0 : -1.0;
          const double margin = 1.0 - sy * z;
          if (margin > 0) coef = -sy;
          epoch_loss += sw * std::max(0.0, margin);
        }
        for (std::size_t i = 0; i < d; ++i) gw[i] += sw * coef * s.features[i];
        gb += sw * coef;
        wsum += sw;
      }
      if (wsum <= 0) continue;
      for (std::size_t i = 0; i < d; ++i) {
        const double g = gw[i] / wsum + hp.l2 * w[i];
        vel_w[i] = hp.momentum * vel_w[i] - hp.learning_rate * g;
        w[i] += vel_w[i];
      }
      vel_b = hp.momentum * vel_b - hp.learning_rate * gb / wsum;
      b += vel_b;
    }
    if (!std::isfinite(epoch_loss)) throw Error("train: non-finite loss during training");
  }
  return {std::move(w), b};
}

std::vector<DenseLayer> init_mlp(std::size_t d, const std::vector<std::size_t>& hidden, Rng& rng) {
  std::vector<DenseLayer> layers;
  std::size_t in = d;
  std::vector<std::size_t> sizes = hidden;
  sizes.push_back(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t out : sizes) {
    DenseLayer l{in, out, Vec(in * out), Vec(out, 0.0)};
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& v : l.weight) v = scale * normal(rng);
    layers.push_back(std::move(l));
    in = out;
  }
  return layers;
}

std::vector<DenseLayer> sgd_mlp(const std::vector<Sample>& samples, const Vec& w_samples,
                                const HyperParams& hp, std::vector<DenseLayer> layers, Rng& rng) {
  auto zero_like = [](const std::vector<DenseLayer>& ls) {
    std::vector<DenseLayer> z = ls;
    for (auto& l : z) {
      std::fill(l.weight.begin(), l.weight.end(), 0.0);
      std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    return z;
  };
  std::vector<DenseLayer> velocity = zero_like(layers);
  const std::size_t bs = std::max<std::size_t>(1, hp.batch_size);
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    const auto order = shuffled_indices(samples.size(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      const Mlp net(layers);
      std::vector<DenseLayer> grads = zero_like(layers);
      double wsum = 0;
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = samples[order[k]];
        const double sw = w_samples[order[k]];
        if (sw == 0) continue;
        const auto fw = net.forward(s.features);
        const Vec& z = fw.post.back();
        const double m = std::max(z[0], z[1]);
        const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
        const Proba p{e0 / (e0 + e1), e1 / (e0 + e1)};
        epoch_loss += sw * cross_entropy(p, s.label);
        const Vec g{sw * (p[0] - (s.label == 0)), sw * (p[1] - (s.label == 1))};
        net.backward(fw, g, &grads, nullptr);
        wsum += sw;
      }
      if (wsum <= 0) continue;
      for (std::size_t li = 0; li < layers.size(); ++li) {
        auto& l = layers[li];
        auto& v = velocity[li];
        const auto& g = grads[li];
        for (std::size_t i = 0; i < l.weight.size(); ++i) {
          v.weight[i] = hp.momentum * v.weight[i] -
                        hp.learning_rate * (g.weight[i] / wsum + hp.l2 * l.weight[i]);
          l.weight[i] += v.weight[i];
        }
        for (std::size_t i = 0; i < l.bias.size(); ++i) {
          v.bias[i] = hp.momentum * v.bias[i] - hp.learning_rate * g.bias[i] / wsum;
          l.bias[i] += v.bias[i];
        }
      }
    }
    if (!std::isfinite(epoch_loss)) throw Error("train: non-finite loss during training");
  }
  return layers;
}

ModelPtr train_random_forest(const std::vector<Sample>& samples, const Vec& w,
                             const HyperParams& hp, Rng& rng) {
  const std::size_t d = samples.front().features.size();
  TreeLearnerOptions opt{hp.max_depth, hp.min_samples_leaf,
                         hp.max_features ? hp.max_features
                                         : std::max<std::size_t>(
                                               1, static_cast<std::size_t>(std::sqrt(double(d))))};
  std::vector<Tree> trees;
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  for (std::size_t t = 0; t < std::max<std::size_t>(1, hp.n_trees); ++t) {
    std::vector<std::size_t> rows(samples.size());
    for (auto& r : rows) r = pick(rng);
    trees.push_back(fit_classification_tree(samples, w, rows, opt, rng));
  }
  return std::make_shared<RandomForest>(d, std::move(trees));
}

ModelPtr train_boosting(const std::vector<Sample>& samples, const Vec& w, const HyperParams& hp) {
  const std::size_t n = samples.size();
  const std::size_t d = samples.front().features.size();
  double w1 = 0, wt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    w1 += w[i] * samples[i].label;
    wt += w[i];
  }
  const double prior = std::clamp(w1 / wt, 1e-6, 1 - 1e-6);
  const double base = std::log(prior / (1 - prior));
  Vec score(n, base);
  std::vector<Tree> trees;
  TreeLearnerOptions opt{hp.boost_depth, hp.min_samples_leaf, 0};
  Vec num(n), den(n);
  for (std::size_t m = 0; m < hp.n_estimators; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(score[i]);
      num[i] = samples[i].label - p;
      den[i] = std::max(p * (1 - p), 1e-12);
    }
    Tree t = fit_regression_tree(samples, w, num, den, opt);
    for (std::size_t i = 0; i < n; ++i) score[i] += hp.shrinkage * t.evaluate(samples[i].features);
    trees.push_back(std::move(t));
  }
  for (double s : score)
    if (!std::isfinite(s)) throw Error("train: non-finite loss during training");
  return std::make_shared<GradientBoosting>(d, base, hp.shrinkage, std::move(trees));
}

ModelPtr train_ensemble(ModelKind kind, const HyperParams& hp, const std::vector<Sample>& samples,
                        const Vec& w, Seed seed) {
  std::vector<ModelKind> kinds;
  switch (kind) {
    case ModelKind::kDeepEns:
      kinds = {ModelKind::kMLP, ModelKind::kMLP, ModelKind::kLR};
      break;
    case ModelKind::kTreeEns:
      kinds = {ModelKind::kDecisionTree, ModelKind::kRandomForest, ModelKind::kGradBoostTrees};
      break;
    default:
      kinds = {ModelKind::kLR, ModelKind::kMLP, ModelKind::kRandomForest,
               ModelKind::kGradBoostTrees};
  }
  std::vector<ModelPtr> members;
  for (std::size_t k = 0; k < kinds.size(); ++k)
    members.push_back(train(kinds[k], hp, samples, w, derive(seed, 1000 + k)));
  return make_ensemble(std::move(members), Vec(kinds.size(), 1.0 / double(kinds.size())), kind);
}

}  // namespace

ModelPtr train(ModelKind kind, const HyperParams& hp, const Dataset& data, Seed seed) {
  return train(kind, hp, data.samples, Vec{}, seed);
}

ModelPtr train(ModelKind kind, const HyperParams& hp, const std::vector<Sample>& samples,
               const Vec& weights, Seed seed) {
  const Vec w = normalized_weights(samples, weights);
  check_training_set(samples, w);
  const std::size_t d = samples.front().features.size();
  Rng rng = make_rng(seed);
  switch (kind) {
    case ModelKind::kLR: {
      auto [wv, b] = sgd_linear(samples, w, hp, LinearLoss::kLogistic, Vec(d, 0.0), 0.0, rng);
      return std::make_shared<LogisticRegression>(std::move(wv), b);
    }
    case ModelKind::kLinearSVM: {
      auto [wv, b] = sgd_linear(samples, w, hp, LinearLoss::kHinge, Vec(d, 0.0), 0.0, rng);
      return std::make_shared<LinearSvm>(std::move(wv), b);
    }
    case ModelKind::kMLP: {
      auto layers = init_mlp(d, hp.hidden, rng);
      return std::make_shared<Mlp>(sgd_mlp(samples, w, hp, std::move(layers), rng));
    }
    case ModelKind::kDecisionTree: {
      std::vector<std::size_t> rows(samples.size());
      std::iota(rows.begin(), rows.end(), 0);
      TreeLearnerOptions opt{hp.max_depth, hp.min_samples_leaf, hp.max_features};
      return std::make_shared<DecisionTree>(d, fit_classification_tree(samples, w, rows, opt, rng));
    }
    case ModelKind::kRandomForest:
      return train_random_forest(samples, w, hp, rng);
    case ModelKind::kGradBoostTrees:
      return train_boosting(samples, w, hp);
    case ModelKind::kDeepEns:
    case ModelKind::kTreeEns:
    case ModelKind::kHeteroEns:
      return train_ensemble(kind, hp, samples, w, seed);
  }
  throw Error("train: unsupported kind");
}

ModelPtr fine_tune(const Model& model, const HyperParams& hp, const std::vector<Sample>& samples,
                   const Vec& weights, Seed seed) {
  const Vec w = normalized_weights(samples, weights);
  check_training_set(samples, w);
  if (!samples.empty() && samples.front().features.size() != model.dim())
    throw Error("fine_tune: dimension mismatch");
  Rng rng = make_rng(seed);
  if (const auto* lr = dynamic_cast<const LogisticRegression*>(&model)) {
    auto [wv, b] = sgd_linear(samples, w, hp, LinearLoss::kLogistic, lr->weights(), lr->bias(), rng);
    return std::make_shared<LogisticRegression>(std::move(wv), b);
  }
  if (const auto* svm = dynamic_cast<const LinearSvm*>(&model)) {
    auto [wv, b] = sgd_linear(samples, w, hp, LinearLoss::kHinge, svm->weights(), svm->bias(), rng);
    return std::make_shared<LinearSvm>(std::move(wv), b);
  }
  if (const auto* mlp = dynamic_cast<const Mlp*>(&model))
    return std::make_shared<Mlp>(sgd_mlp(samples, w, hp, mlp->layers(), rng));
  if (const auto* ens = dynamic_cast<const Ensemble*>(&model)) {
    std::vector<ModelPtr> members;
    for (std::size_t k = 0; k < ens->members().size(); ++k)
      members.push_back(fine_tune(*ens->members()[k], hp, samples, weights, derive(seed, 1000 + k)));
    return make_ensemble(std::move(members), ens->member_weights(), ens->kind());
  }
  return train(model.kind(), hp, samples, weights, seed);
}

}  // namespace advkit
