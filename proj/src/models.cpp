#include <algorithm>
#include <fstream>
#include <sstream>

#include "advkit/model.hpp"
#include "advkit/models.hpp"

namespace advkit {

using nlohmann::json;

ModelKind parse_model_kind(const std::string& name) {
  static const std::pair<const char*, ModelKind> kTable[] = {
      {"LR", ModelKind::kLR},
      {"LinearSVM", ModelKind::kLinearSVM},
      {"MLP", ModelKind::kMLP},
      {"DecisionTree", ModelKind::kDecisionTree},
      {"RandomForest", ModelKind::kRandomForest},
      {"GradBoostTrees", ModelKind::kGradBoostTrees},
      {"DeepEns", ModelKind::kDeepEns},
      {"TreeEns", ModelKind::kTreeEns},
      {"HeteroEns", ModelKind::kHeteroEns},
  };
  for (const auto& [n, k] : kTable)
    if (name == n) return k;
  std::string valid;
  for (const auto& [n, k] : kTable) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw Error("unknown model kind '" + name + "' (valid: " + valid + ")");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLR: return "LR";
    case ModelKind::kLinearSVM: return "LinearSVM";
    case ModelKind::kMLP: return "MLP";
    case ModelKind::kDecisionTree: return "DecisionTree";
    case ModelKind::kRandomForest: return "RandomForest";
    case ModelKind::kGradBoostTrees: return "GradBoostTrees";
    case ModelKind::kDeepEns: return "DeepEns";
    case ModelKind::kTreeEns: return "TreeEns";
    case ModelKind::kHeteroEns: return "HeteroEns";
  }
  return "?";
}

Capability capability_of(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLR:
    case ModelKind::kLinearSVM:
    case ModelKind::kMLP:
    case ModelKind::kDeepEns:
      return Capability::kDifferentiable;
    default:
      return Capability::kQueryOnly;
  }
}

bool is_tree_kind(ModelKind kind) {
  return kind == ModelKind::kDecisionTree || kind == ModelKind::kRandomForest ||
         kind == ModelKind::kGradBoostTrees || kind == ModelKind::kTreeEns;
}

double cross_entropy(const Proba& p, int y) {
  return -std::log(std::max(p[static_cast<std::size_t>(y)], kProbFloor));
}

namespace {

Proba softmax2(const Logits& l) {
  const double m = std::max(l[0], l[1]);
  const double e0 = std::exp(l[0] - m), e1 = std::exp(l[1] - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

}  // namespace

// ---------------------------------------------------------------------------
// Model base

void Model::check_dim(ConstVecView x) const {
  if (x.size() != dim())
    throw Error("input dimension " + std::to_string(x.size()) + " != model dimension " +
                std::to_string(dim()));
}

void Model::require_differentiable(const char* what) const {
  if (!differentiable())
    throw Error(std::string(what) + ": model kind " + to_string(kind()) + " is query-only");
}

Proba Model::predict_proba(ConstVecView x) const {
  check_dim(x);
  return do_predict_proba(x);
}

int Model::predict(ConstVecView x) const {
  const Proba p = predict_proba(x);
  return p[1] > p[0] ? kMalicious : kBenign;
}

double Model::loss(ConstVecView x, int y) const {
  check_dim(x);
  if (y != 0 && y != 1) throw Error("loss: label must be 0 or 1");
  return do_loss(x, y);
}

Logits Model::logits(ConstVecView x) const {
  check_dim(x);
  require_differentiable("logits");
  return do_logits(x);
}

LogitGradients Model::logit_gradients(ConstVecView x) const {
  check_dim(x);
  require_differentiable("logit_gradients");
  return do_logit_gradients(x);
}

Vec Model::input_gradient(ConstVecView x, int y) const {
  check_dim(x);
  require_differentiable("input_gradient");
  if (y != 0 && y != 1) throw Error("input_gradient: label must be 0 or 1");
  return do_input_gradient(x, y);
}

Vec Model::proba_gradient(ConstVecView x) const {
  check_dim(x);
  require_differentiable("proba_gradient");
  const Proba p = do_predict_proba(x);
  const LogitGradients g = do_logit_gradients(x);
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = p[0] * p[1] * (g[1][i] - g[0][i]);
  return out;
}

double Model::do_loss(ConstVecView x, int y) const {
  return cross_entropy(do_predict_proba(x), y);
}

Logits Model::do_logits(ConstVecView x) const {
  const Proba p = do_predict_proba(x);
  return {std::log(std::max(p[0], kProbFloor)), std::log(std::max(p[1], kProbFloor))};
}

LogitGradients Model::do_logit_gradients(ConstVecView) const {
  throw Error("logit gradients unavailable for " + to_string(kind()));
}

Vec Model::do_input_gradient(ConstVecView x, int y) const {
  const Proba p = softmax2(do_logits(x));
  Vec out(x.size(), 0.0);
  if (p[static_cast<std::size_t>(y)] < kProbFloor) return out;
  const LogitGradients g = do_logit_gradients(x);
  for (int c = 0; c < 2; ++c) {
    const double coef = p[static_cast<std::size_t>(c)] - (c == y ? 1.0 : 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += coef * g[static_cast<std::size_t>(c)][i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear models

Proba LogisticRegression::do_predict_proba(ConstVecView x) const {
  const double p1 = sigmoid(decision(x));
  return {1.0 - p1, p1};
}

Logits LogisticRegression::do_logits(ConstVecView x) const { return {0.0, decision(x)}; }

LogitGradients LogisticRegression::do_logit_gradients(ConstVecView x) const {
  return {Vec(x.size(), 0.0), w_};
}

json LogisticRegression::params_json() const { return {{"w", w_}, {"b", b_}}; }

Proba LinearSvm::do_predict_proba(ConstVecView x) const {
  const double p1 = sigmoid(decision(x));
  return {1.0 - p1, p1};
}

double LinearSvm::do_loss(ConstVecView x, int y) const {
  const double s = y == 1 ? 1.0 : -1.0;
  return std::max(0.0, 1.0 - s * decision(x));
}

Logits LinearSvm::do_logits(ConstVecView x) const { return {0.0, decision(x)}; }

LogitGradients LinearSvm::do_logit_gradients(ConstVecView x) const {
  return {Vec(x.size(), 0.0), w_};
}

Vec LinearSvm::do_input_gradient(ConstVecView x, int y) const {
  const double s = y == 1 ? 1.0 : -1.0;
  if (1.0 - s * decision(x) <= 0.0) return Vec(x.size(), 0.0);
  return scaled(w_, -s);
}

json LinearSvm::params_json() const { return {{"w", w_}, {"b", b_}}; }

// ---------------------------------------------------------------------------
// MLP

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error("Mlp: no layers");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.weight.size() != l.in * l.out || l.bias.size() != l.out)
      throw Error("Mlp: layer " + std::to_string(k) + " has inconsistent shapes");
    if (k > 0 && l.in != layers_[k - 1].out) throw Error("Mlp: layer sizes do not chain");
  }
  if (layers_.back().out != 2) throw Error("Mlp: output layer must have 2 units");
}

Mlp::Forward Mlp::forward(ConstVecView x) const {
  Forward fw;
  fw.post.emplace_back(x.begin(), x.end());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    const Vec& in = fw.post.back();
    Vec z(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      double s = l.bias[o];
      const double* row = &l.weight[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) s += row[i] * in[i];
      z[o] = s;
    }
    Vec a = z;
    if (k + 1 < layers_.size())
      for (double& v : a) v = std::max(v, 0.0);
    fw.pre.push_back(std::move(z));
    fw.post.push_back(std::move(a));
  }
  return fw;
}

void Mlp::backward(const Forward& fw, ConstVecView g_logits, std::vector<DenseLayer>* param_grads,
                   Vec* input_grad) const {
  Vec g(g_logits.begin(), g_logits.end());
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    if (k + 1 < layers_.size())
      for (std::size_t o = 0; o < l.out; ++o)
        if (fw.pre[k][o] <= 0) g[o] = 0;
    const Vec& in = fw.post[k];
    if (param_grads) {
      auto& pg = (*param_grads)[k];
      for (std::size_t o = 0; o < l.out; ++o) {
        pg.bias[o] += g[o];
        double* row = &pg.weight[o * l.in];
        for (std::size_t i = 0; i < l.in; ++i) row[i] += g[o] * in[i];
      }
    }
    if (k == 0 && !input_grad) break;
    Vec gin(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* row = &l.weight[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) gin[i] += g[o] * row[i];
    }
    g = std::move(gin);
  }
  if (input_grad) *input_grad = std::move(g);
}

Proba Mlp::do_predict_proba(ConstVecView x) const { return softmax2(do_logits(x)); }

Logits Mlp::do_logits(ConstVecView x) const {
  const Forward fw = forward(x);
  return {fw.post.back()[0], fw.post.back()[1]};
}

LogitGradients Mlp::do_logit_gradients(ConstVecView x) const {
  const Forward fw = forward(x);
  LogitGradients out;
  for (std::size_t c = 0; c < 2; ++c) {
    Vec e(2, 0.0);
    e[c] = 1.0;
    backward(fw, e, nullptr, &out[c]);
  }
  return out;
}

json Mlp::params_json() const {
  json layers = json::array();
  for (const auto& l : layers_)
    layers.push_back({{"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}});
  return {{"layers", layers}};
}

// ---------------------------------------------------------------------------
// Trees

double Tree::evaluate(ConstVecView x) const {
  std::size_t n = 0;
  while (!nodes[n].is_leaf())
    n = static_cast<std::size_t>(x[nodes[n].feature] <= nodes[n].threshold ? nodes[n].left
                                                                            : nodes[n].right);
  return nodes[n].value;
}

json Tree::to_json() const {
  json arr = json::array();
  for (const auto& n : nodes) {
    if (n.is_leaf()) arr.push_back({{"value", n.value}});
    else
      arr.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right}});
  }
  return arr;
}

Tree Tree::from_json(const json& j) {
  Tree t;
  for (const auto& jn : j) {
    TreeNode n;
    if (jn.contains("value")) {
      n.value = jn["value"].get<double>();
    } else {
      n.feature = jn.at("feature").get<std::size_t>();
      n.threshold = jn.at("threshold").get<double>();
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
    }
    t.nodes.push_back(n);
  }
  if (t.nodes.empty()) throw Error("tree: no nodes");
  const int count = static_cast<int>(t.nodes.size());
  for (const auto& n : t.nodes)
    if (!n.is_leaf() && (n.left >= count || n.right >= count || n.right < 0))
      throw Error("tree: child index out of range");
  return t;
}

Proba DecisionTree::do_predict_proba(ConstVecView x) const {
  const double p1 = tree_.evaluate(x);
  return {1.0 - p1, p1};
}

json DecisionTree::params_json() const { return {{"dim", dim_}, {"tree", tree_.to_json()}}; }

Proba RandomForest::do_predict_proba(ConstVecView x) const {
  double s = 0;
  for (const auto& t : trees_) s += t.evaluate(x);
  const double p1 = s / static_cast<double>(trees_.size());
  return {1.0 - p1, p1};
}

json RandomForest::params_json() const {
  json trees = json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"dim", dim_}, {"trees", trees}};
}

double GradientBoosting::raw_score(ConstVecView x) const {
  double s = base_;
  for (const auto& t : trees_) s += shrinkage_ * t.evaluate(x);
  return s;
}

Proba GradientBoosting::do_predict_proba(ConstVecView x) const {
  const double p1 = sigmoid(raw_score(x));
  return {1.0 - p1, p1};
}

json GradientBoosting::params_json() const {
  json trees = json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"dim", dim_}, {"base", base_}, {"shrinkage", shrinkage_}, {"trees", trees}};
}

// ---------------------------------------------------------------------------
// Ensembles

Ensemble::Ensemble(ModelKind kind, std::vector<ModelPtr> members, Vec weights)
    : kind_(kind), members_(std::move(members)), weights_(std::move(weights)) {
  if (kind_ != ModelKind::kDeepEns && kind_ != ModelKind::kTreeEns &&
      kind_ != ModelKind::kHeteroEns)
    throw Error("ensemble kind must be DeepEns, TreeEns or HeteroEns");
  if (members_.empty()) throw Error("ensemble: no members");
  if (weights_.size() != members_.size()) throw Error("ensemble: weights/members size mismatch");
  double s = 0;
  for (double w : weights_) {
    if (!(w >= 0)) throw Error("ensemble: negative weight");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9) throw Error("ensemble: weights must sum to 1");
  const std::size_t d = members_.front()->dim();
  for (const auto& m : members_) {
    if (!m) throw Error("ensemble: null member");
    if (m->dim() != d) throw Error("ensemble: member dimensions differ");
    if (kind_ == ModelKind::kDeepEns && !m->differentiable())
      throw Error("DeepEns member " + to_string(m->kind()) + " is not differentiable");
    if (kind_ == ModelKind::kTreeEns && !is_tree_kind(m->kind()))
      throw Error("TreeEns member " + to_string(m->kind()) + " is not a tree model");
  }
}

Proba Ensemble::do_predict_proba(ConstVecView x) const {
  double p1 = 0;
  for (std::size_t k = 0; k < members_.size(); ++k)
    p1 += weights_[k] * members_[k]->predict_proba(x)[1];
  p1 = std::clamp(p1, 0.0, 1.0);
  return {1.0 - p1, p1};
}

// Logits are log-probabilities, so d logit_c = d p_c / p_c.
LogitGradients Ensemble::do_logit_gradients(ConstVecView x) const {
  Vec dp1(x.size(), 0.0);
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (weights_[k] == 0) continue;
    const Vec g = members_[k]->proba_gradient(x);
    for (std::size_t i = 0; i < x.size(); ++i) dp1[i] += weights_[k] * g[i];
  }
  const Proba p = do_predict_proba(x);
  LogitGradients out{Vec(x.size(), 0.0), Vec(x.size(), 0.0)};
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (p[0] >= kProbFloor) out[0][i] = -dp1[i] / p[0];
    if (p[1] >= kProbFloor) out[1][i] = dp1[i] / p[1];
  }
  return out;
}

json Ensemble::params_json() const {
  json members = json::array();
  for (const auto& m : members_) members.push_back(model_to_json(*m));
  return {{"weights", weights_}, {"members", members}};
}

ModelPtr make_ensemble(std::vector<ModelPtr> members, Vec weights, ModelKind kind) {
  return std::make_shared<Ensemble>(kind, std::move(members), std::move(weights));
}

// ---------------------------------------------------------------------------
// Serialization

json model_to_json(const Model& model) {
  return {{"format", "advkit-model"},
          {"version", kModelFormatVersion},
          {"kind", to_string(model.kind())},
          {"params", model.params_json()}};
}

ModelPtr model_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != "advkit-model") throw Error("model: bad format tag");
    const int version = j.at("version").get<int>();
    if (version > kModelFormatVersion)
      throw Error("model: format version " + std::to_string(version) +
                  " is newer than supported version " + std::to_string(kModelFormatVersion));
    const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
    const json& p = j.at("params");
    switch (kind) {
      case ModelKind::kLR:
        return std::make_shared<LogisticRegression>(p.at("w").get<Vec>(), p.at("b").get<double>());
      case ModelKind::kLinearSVM:
        return std::make_shared<LinearSvm>(p.at("w").get<Vec>(), p.at("b").get<double>());
      case ModelKind::kMLP: {
        std::vector<DenseLayer> layers;
        for (const auto& jl : p.at("layers"))
          layers.push_back({jl.at("in").get<std::size_t>(), jl.at("out").get<std::size_t>(),
                            jl.at("weight").get<Vec>(), jl.at("bias").get<Vec>()});
        return std::make_shared<Mlp>(std::move(layers));
      }
      case ModelKind::kDecisionTree:
        return std::make_shared<DecisionTree>(p.at("dim").get<std::size_t>(),
                                              Tree::from_json(p.at("tree")));
      case ModelKind::kRandomForest: {
        std::vector<Tree> trees;
        for (const auto& jt : p.at("trees")) trees.push_back(Tree::from_json(jt));
        return std::make_shared<RandomForest>(p.at("dim").get<std::size_t>(), std::move(trees));
      }
      case ModelKind::kGradBoostTrees: {
        std::vector<Tree> trees;
        for (const auto& jt : p.at("trees")) trees.push_back(Tree::from_json(jt));
        return std::make_shared<GradientBoosting>(p.at("dim").get<std::size_t>(),
                                                  p.at("base").get<double>(),
                                                  p.at("shrinkage").get<double>(), std::move(trees));
      }
      case ModelKind::kDeepEns:
      case ModelKind::kTreeEns:
      case ModelKind::kHeteroEns: {
        std::vector<ModelPtr> members;
        for (const auto& jm : p.at("members")) members.push_back(model_from_json(jm));
        return make_ensemble(std::move(members), p.at("weights").get<Vec>(), kind);
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("model: malformed document: ") + e.what());
  }
  throw Error("model: unreachable kind");
}

void save_model(const Model& model, const std::string& path, const json& provenance) {
  json j = model_to_json(model);
  if (!provenance.empty()) j["provenance"] = provenance;
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file '" + path + "'");
  out << j.dump(1) << '\n';
}

ModelPtr load_model(const std::string& path, json* provenance) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("model file '" + path + "': " + e.what());
  }
  if (provenance) *provenance = j.value("provenance", json::object());
  return model_from_json(j);
}

}  // namespace advkit
