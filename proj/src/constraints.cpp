#include "advkit/constraints.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace advkit {

FeatureGroup parse_feature_group(const std::string& name) {
  if (name == "independent") return FeatureGroup::kIndependent;
  if (name == "dependent") return FeatureGroup::kDependent;
  if (name == "uncontrollable") return FeatureGroup::kUncontrollable;
  if (name == "packet_derived") return FeatureGroup::kPacketDerived;
  throw Error("unknown feature group '" + name +
              "' (valid: independent, dependent, uncontrollable, packet_derived)");
}

std::string to_string(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::kIndependent: return "independent";
    case FeatureGroup::kDependent: return "dependent";
    case FeatureGroup::kUncontrollable: return "uncontrollable";
    case FeatureGroup::kPacketDerived: return "packet_derived";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// DependencyFormula

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::optional<DependencyFormula::Op> op_of(const std::string& tok) {
  using Op = DependencyFormula::Op;
  if (tok == "+") return Op::kAdd;
  if (tok == "-") return Op::kSub;
  if (tok == "*") return Op::kMul;
  if (tok == "/") return Op::kDiv;
  return std::nullopt;
}

const char* op_symbol(DependencyFormula::Op op) {
  using Op = DependencyFormula::Op;
  switch (op) {
    case Op::kAdd: return "+";
    case Op::kSub: return "-";
    case Op::kMul: return "*";
    case Op::kDiv: return "/";
    default: return "?";
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

DependencyFormula DependencyFormula::constant(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::kConst;
  n->value = v;
  return DependencyFormula(std::move(n));
}

DependencyFormula DependencyFormula::feature(std::size_t index) {
  auto n = std::make_shared<Node>();
  n->op = Op::kFeature;
  n->index = index;
  return DependencyFormula(std::move(n));
}

DependencyFormula DependencyFormula::binary(Op op, DependencyFormula lhs, DependencyFormula rhs) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(lhs.root_);
  n->rhs = std::move(rhs.root_);
  return DependencyFormula(std::move(n));
}

DependencyFormula DependencyFormula::parse(const std::string& text,
                                           const std::vector<std::string>& feature_names) {
  const auto tokens = tokenize(text);
  std::size_t pos = 0;
  auto parse_at = [&](auto&& self) -> DependencyFormula {
    if (pos >= tokens.size()) throw Error("formula '" + text + "': unexpected end of expression");
    const std::string& tok = tokens[pos++];
    if (auto op = op_of(tok)) {
      DependencyFormula lhs = self(self);
      DependencyFormula rhs = self(self);
      return binary(*op, std::move(lhs), std::move(rhs));
    }
    double v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec == std::errc() && ptr == tok.data() + tok.size()) return constant(v);
    const auto it = std::find(feature_names.begin(), feature_names.end(), tok);
    if (it == feature_names.end())
      throw Error("formula '" + text + "': unknown feature '" + tok + "'");
    return feature(static_cast<std::size_t>(it - feature_names.begin()));
  };
  DependencyFormula f = parse_at(parse_at);
  if (pos != tokens.size())
    throw Error("formula '" + text + "': trailing tokens after expression");
  return f;
}

double DependencyFormula::eval_node(const Node& n, ConstVecView x) {
  switch (n.op) {
    case Op::kConst: return n.value;
    case Op::kFeature: return x[n.index];
    case Op::kAdd: return eval_node(*n.lhs, x) + eval_node(*n.rhs, x);
    case Op::kSub: return eval_node(*n.lhs, x) - eval_node(*n.rhs, x);
    case Op::kMul: return eval_node(*n.lhs, x) * eval_node(*n.rhs, x);
    case Op::kDiv: {
      const double den = eval_node(*n.rhs, x);
      if (std::abs(den) < kSafeDivisionThreshold) return 0.0;
      return eval_node(*n.lhs, x) / den;
    }
  }
  return 0.0;
}

double DependencyFormula::evaluate(ConstVecView x) const { return eval_node(*root_, x); }

std::vector<std::size_t> DependencyFormula::references() const {
  std::vector<std::size_t> out;
  auto walk = [&](auto&& self, const Node& n) -> void {
    if (n.op == Op::kFeature) out.push_back(n.index);
    if (n.lhs) self(self, *n.lhs);
    if (n.rhs) self(self, *n.rhs);
  };
  walk(walk, *root_);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string DependencyFormula::to_prefix(const std::vector<std::string>& feature_names) const {
  std::string out;
  auto walk = [&](auto&& self, const Node& n) -> void {
    if (!out.empty()) out += ' ';
    switch (n.op) {
      case Op::kConst: out += format_double(n.value); return;
      case Op::kFeature: out += feature_names.at(n.index); return;
      default:
        out += op_symbol(n.op);
        self(self, *n.lhs);
        self(self, *n.rhs);
    }
  };
  walk(walk, *root_);
  return out;
}

// ---------------------------------------------------------------------------
// ConstraintSchema

ConstraintSchema::ConstraintSchema(std::vector<FeatureSpec> features,
                                   std::optional<std::vector<std::size_t>> mask)
    : features_(std::move(features)), mask_(std::move(mask)) {
  const std::size_t d = features_.size();
  if (d == 0) throw Error("schema has no features");
  for (std::size_t i = 0; i < d; ++i) {
    const FeatureSpec& f = features_[i];
    if (!(f.lo <= f.hi)) throw Error("feature '" + f.name + "': lo > hi");
    if (f.group == FeatureGroup::kDependent) {
      if (!f.formula) throw Error("dependent feature '" + f.name + "' has no formula");
      for (std::size_t ref : f.formula->references()) {
        if (ref >= d) throw Error("feature '" + f.name + "': formula index out of range");
        if (features_[ref].group == FeatureGroup::kDependent)
          throw Error("dependent feature '" + f.name + "' references dependent feature '" +
                      features_[ref].name + "' (dependency chains and cycles are rejected)");
      }
      dependent_order_.push_back(i);
    } else if (f.formula) {
      throw Error("feature '" + f.name + "' has a formula but is not dependent");
    }
  }
  in_mask_.assign(d, !mask_.has_value());
  if (mask_) {
    for (std::size_t i : *mask_) {
      if (i >= d) throw Error("mask index " + std::to_string(i) + " out of range");
      in_mask_[i] = true;
    }
  }
  controllable_.resize(d);
  for (std::size_t i = 0; i < d; ++i)
    controllable_[i] = in_mask_[i] && features_[i].group == FeatureGroup::kIndependent;
}

ConstraintSchema ConstraintSchema::box(std::size_t d, double lo, double hi) {
  std::vector<FeatureSpec> fs(d);
  for (std::size_t i = 0; i < d; ++i) {
    fs[i].name = "f" + std::to_string(i);
    fs[i].lo = lo;
    fs[i].hi = hi;
  }
  return ConstraintSchema(std::move(fs));
}

std::vector<std::string> ConstraintSchema::feature_names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

std::vector<std::size_t> ConstraintSchema::controllable_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < controllable_.size(); ++i)
    if (controllable_[i]) out.push_back(i);
  return out;
}

Vec ConstraintSchema::remap(ConstVecView x_orig, ConstVecView x_adv) const {
  const std::size_t d = dim();
  if (x_orig.size() != d || x_adv.size() != d)
    throw Error("remap: dimension mismatch (schema " + std::to_string(d) + ", got " +
                std::to_string(x_orig.size()) + "/" + std::to_string(x_adv.size()) + ")");
  Vec out(x_orig.begin(), x_orig.end());
  for (std::size_t i = 0; i < d; ++i)
    if (controllable_[i]) out[i] = std::clamp(x_adv[i], features_[i].lo, features_[i].hi);
  // Dependent features are recomputed last, from the emitted vector. Outside
  // the mask they keep their original value.
  for (std::size_t i : dependent_order_)
    if (in_mask_[i]) out[i] = features_[i].formula->evaluate(out);
  return out;
}

// ---------------------------------------------------------------------------
// Projections

namespace {

// Euclidean projection of nonnegative v onto {u >= 0, sum u <= eps}.
Vec project_l1_abs(const Vec& v, double eps) {
  Vec mu = v;
  std::sort(mu.begin(), mu.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    cumsum += mu[j];
    const double t = (cumsum - eps) / static_cast<double>(j + 1);
    if (mu[j] - t > 0) theta = t;
  }
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

}  // namespace

Vec project_lp(ConstVecView delta, Norm which, double eps) {
  if (eps < 0) throw Error("project_lp: negative eps");
  Vec out(delta.begin(), delta.end());
  switch (which) {
    case Norm::kLinf:
      for (double& v : out) v = std::clamp(v, -eps, eps);
      return out;
    case Norm::kL2: {
      const double n = norm_l2(out);
      if (n <= eps) return out;
      const double s = eps / n;
      for (double& v : out) v *= s;
      // Rounding can leave the norm a few ulps above eps.
      while (norm_l2(out) > eps)
        for (double& v : out) v = std::nextafter(v, 0.0);
      return out;
    }
    case Norm::kL1: {
      if (norm_l1(out) <= eps) return out;
      Vec mag(out.size());
      for (std::size_t i = 0; i < out.size(); ++i) mag[i] = std::abs(out[i]);
      const Vec p = project_l1_abs(mag, eps);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = sign(out[i]) * p[i];
      while (norm_l1(out) > eps)
        for (double& v : out) v = std::nextafter(v, 0.0);
      return out;
    }
  }
  return out;
}

Vec legalize(const ConstraintSchema& schema, ConstVecView x_orig, ConstVecView candidate,
             Norm which, double eps) {
  if (candidate.size() != schema.dim() || x_orig.size() != schema.dim())
    throw Error("legalize: dimension mismatch");
  Vec delta(schema.dim(), 0.0);
  for (std::size_t i = 0; i < delta.size(); ++i)
    if (schema.controllable(i)) delta[i] = candidate[i] - x_orig[i];
  delta = project_lp(delta, which, eps);
  Vec x = add(x_orig, delta);
  return schema.remap(x_orig, x);
}

double budget_norm(const ConstraintSchema& schema, ConstVecView x_orig, ConstVecView x_adv,
                   Norm which) {
  Vec delta(schema.dim(), 0.0);
  for (std::size_t i = 0; i < delta.size(); ++i)
    if (schema.feature(i).group != FeatureGroup::kDependent) delta[i] = x_adv[i] - x_orig[i];
  return norm(delta, which);
}

// ---------------------------------------------------------------------------
// Schema files

std::string schema_to_json(const ConstraintSchema& schema) {
  using nlohmann::json;
  const auto names = schema.feature_names();
  json j;
  j["version"] = 1;
  j["features"] = json::array();
  for (const auto& f : schema.features()) {
    json jf{{"name", f.name}, {"group", to_string(f.group)}, {"lo", f.lo}, {"hi", f.hi}};
    if (f.formula) jf["formula"] = f.formula->to_prefix(names);
    j["features"].push_back(jf);
  }
  if (schema.mask()) {
    json m = json::array();
    for (std::size_t i : *schema.mask()) m.push_back(names[i]);
    j["mask"] = m;
  }
  return j.dump(2);
}

ConstraintSchema schema_from_json(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("schema: invalid JSON: ") + e.what());
  }
  if (j.value("version", 1) > 1) throw Error("schema: unsupported version");
  if (!j.contains("features") || !j["features"].is_array())
    throw Error("schema: missing 'features' array");
  std::vector<std::string> names;
  for (const auto& jf : j["features"]) names.push_back(jf.at("name").get<std::string>());
  std::vector<FeatureSpec> fs;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& jf = j["features"][i];
    FeatureSpec f;
    f.name = names[i];
    f.group = parse_feature_group(jf.value("group", std::string("independent")));
    f.lo = jf.value("lo", 0.0);
    f.hi = jf.value("hi", 1.0);
    if (jf.contains("formula"))
      f.formula = DependencyFormula::parse(jf["formula"].get<std::string>(), names);
    fs.push_back(std::move(f));
  }
  std::optional<std::vector<std::size_t>> mask;
  if (j.contains("mask")) {
    mask.emplace();
    for (const auto& m : j["mask"]) {
      if (m.is_number_unsigned()) {
        mask->push_back(m.get<std::size_t>());
      } else {
        const auto name = m.get<std::string>();
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw Error("schema: mask names unknown feature '" + name + "'");
        mask->push_back(static_cast<std::size_t>(it - names.begin()));
      }
    }
  }
  return ConstraintSchema(std::move(fs), std::move(mask));
}

ConstraintSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open schema file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return schema_from_json(ss.str());
}

void save_schema(const ConstraintSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write schema file '" + path + "'");
  out << schema_to_json(schema) << '\n';
}

}  // namespace advkit
