#include "advkit/attack.hpp"

#include <algorithm>

#include "advkit/attacks_gradient.hpp"
#include "advkit/attacks_zo.hpp"

namespace advkit {

using nlohmann::json;

namespace {

struct KindName {
  AttackKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {AttackKind::kFgsm, "fgsm"},         {AttackKind::kPgd, "pgd"},
    {AttackKind::kBim, "bim"},           {AttackKind::kCw, "cw"},
    {AttackKind::kDeepFool, "deepfool"}, {AttackKind::kJsma, "jsma"},
    {AttackKind::kZoo, "zoo"},           {AttackKind::kNes, "nes"},
    {AttackKind::kZosgd, "zosgd"},       {AttackKind::kZoAdamm, "zoadamm"},
    {AttackKind::kBoundary, "ba"},       {AttackKind::kHsja, "hsja"},
};

}  // namespace

const std::vector<std::string>& attack_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& kn : kKindNames) out.emplace_back(kn.name);
    return out;
  }();
  return names;
}

AttackKind parse_attack_kind(const std::string& name) {
  for (const auto& kn : kKindNames)
    if (name == kn.name) return kn.kind;
  std::string valid;
  for (const auto& n : attack_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw Error("unknown attack '" + name + "' (valid: " + valid + ")");
}

std::string to_string(AttackKind kind) {
  for (const auto& kn : kKindNames)
    if (kind == kn.kind) return kn.name;
  return "?";
}

bool requires_gradients(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm:
    case AttackKind::kPgd:
    case AttackKind::kBim:
    case AttackKind::kCw:
    case AttackKind::kDeepFool:
    case AttackKind::kJsma:
      return true;
    default:
      return false;
  }
}

AttackParams default_params(AttackKind kind) {
  AttackParams p;
  switch (kind) {
    case AttackKind::kFgsm:
      p.iterations = 1;
      break;
    case AttackKind::kPgd:
      p.iterations = 40;
      break;
    case AttackKind::kBim:
      p.iterations = 10;
      break;
    case AttackKind::kCw:
      p.iterations = 100;
      p.step = 0.01;
      break;
    case AttackKind::kDeepFool:
      p.norm = Norm::kL1;
      p.eps = 1.0;
      p.iterations = 50;
      break;
    case AttackKind::kJsma:
      p.norm = Norm::kL1;
      p.eps = 1.0;
      p.iterations = 100;
      break;
    case AttackKind::kZoo:
    case AttackKind::kNes:
    case AttackKind::kZosgd:
    case AttackKind::kZoAdamm:
      p.iterations = 1000;
      break;
    case AttackKind::kBoundary:
    case AttackKind::kHsja:
      p.norm = Norm::kL1;
      p.eps = 1.0;
      p.iterations = 1000;
      break;
  }
  return p;
}

json AttackParams::to_json() const {
  json j{{"norm", advkit::to_string(norm)},
         {"eps", eps},
         {"step", step},
         {"iterations", iterations},
         {"cw_c", cw_c},
         {"cw_kappa", cw_kappa},
         {"overshoot", overshoot},
         {"bim_variant", bim_variant == BimVariant::kA ? "A" : "B"},
         {"jsma_theta", jsma_theta},
         {"hinge_k", hinge_k},
         {"sigma", sigma},
         {"h", h},
         {"population", population},
         {"coords_per_iter", coords_per_iter},
         {"beta1", beta1},
         {"beta2", beta2},
         {"adam_eps", adam_eps},
         {"query_budget", query_budget},
         {"init_budget", init_budget},
         {"orth_step", orth_step},
         {"src_step", src_step},
         {"hsja_max_directions", hsja_max_directions},
         {"binary_tolerance", binary_tolerance}};
  return j;
}

AttackParams AttackParams::from_json(const json& j, AttackParams p) {
  if (!j.is_object()) throw Error("attack params must be an object");
  const json known = p.to_json();
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw Error("attack params: unknown field '" + key + "'");
  try {
    if (j.contains("norm")) p.norm = parse_norm(j["norm"].get<std::string>());
    p.eps = j.value("eps", p.eps);
    p.step = j.value("step", p.step);
    p.iterations = j.value("iterations", p.iterations);
    p.cw_c = j.value("cw_c", p.cw_c);
    p.cw_kappa = j.value("cw_kappa", p.cw_kappa);
    p.overshoot = j.value("overshoot", p.overshoot);
    if (j.contains("bim_variant")) {
      const auto v = j["bim_variant"].get<std::string>();
      if (v != "A" && v != "B") throw Error("attack params: bim_variant must be A or B");
      p.bim_variant = v == "A" ? BimVariant::kA : BimVariant::kB;
    }
    p.jsma_theta = j.value("jsma_theta", p.jsma_theta);
    p.hinge_k = j.value("hinge_k", p.hinge_k);
    p.sigma = j.value("sigma", p.sigma);
    p.h = j.value("h", p.h);
    p.population = j.value("population", p.population);
    p.coords_per_iter = j.value("coords_per_iter", p.coords_per_iter);
    p.beta1 = j.value("beta1", p.beta1);
    p.beta2 = j.value("beta2", p.beta2);
    p.adam_eps = j.value("adam_eps", p.adam_eps);
    p.query_budget = j.value("query_budget", p.query_budget);
    p.init_budget = j.value("init_budget", p.init_budget);
    p.orth_step = j.value("orth_step", p.orth_step);
    p.src_step = j.value("src_step", p.src_step);
    p.hsja_max_directions = j.value("hsja_max_directions", p.hsja_max_directions);
    p.binary_tolerance = j.value("binary_tolerance", p.binary_tolerance);
  } catch (const json::exception& e) {
    throw Error(std::string("attack params: ") + e.what());
  }
  if (p.eps < 0) throw Error("attack params: eps must be >= 0");
  if (p.iterations < 1) throw Error("attack params: iterations must be >= 1");
  if (!(p.sigma > 0) || !(p.h > 0)) throw Error("attack params: sigma and h must be > 0");
  if (p.population < 1) throw Error("attack params: population must be >= 1");
  if (p.beta1 < 0 || p.beta1 >= 1 || p.beta2 < 0 || p.beta2 >= 1)
    throw Error("attack params: beta1, beta2 must lie in [0, 1)");
  return p;
}

bool AttackResult::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

// ---------------------------------------------------------------------------

void QueryCounter::charge() {
  if (used_ >= budget_) throw QueryBudgetExhausted{};
  ++used_;
}

Proba QueryCounter::proba(ConstVecView x) {
  charge();
  return model_.predict_proba(x);
}

int QueryCounter::label(ConstVecView x) {
  const Proba p = proba(x);
  return p[1] > p[0] ? kMalicious : kBenign;
}

Logits QueryCounter::logits(ConstVecView x) {
  charge();
  return model_.logits(x);
}

LogitGradients QueryCounter::logit_gradients(ConstVecView x) {
  charge();
  return model_.logit_gradients(x);
}

Vec QueryCounter::loss_gradient(ConstVecView x, int y) {
  charge();
  return model_.input_gradient(x, y);
}

double QueryCounter::loss(ConstVecView x, int y) {
  charge();
  return model_.loss(x, y);
}

void fill_norms(AttackResult& r, ConstVecView x) {
  const Vec d = sub(r.x_adv, x);
  r.l1 = norm_l1(d);
  r.l2 = norm_l2(d);
  r.linf = norm_linf(d);
}

AttackResult finish_attack(QueryCounter& oracle, const ConstraintSchema& schema, ConstVecView x,
                           ConstVecView candidate, const AttackParams& params,
                           std::size_t iterations, std::vector<double> trace,
                           std::vector<std::string> flags) {
  AttackResult r;
  r.x_adv = legalize(schema, x, candidate, params.norm, params.eps);
  r.iterations = iterations;
  r.trace = std::move(trace);
  r.flags = std::move(flags);
  try {
    r.success = oracle.label(r.x_adv) == kBenign;
  } catch (const QueryBudgetExhausted&) {
    // Callers reserve one query for this check; reaching here means the
    // budget was zero.
    r.success = false;
    r.flags.push_back("budget_exhausted");
  }
  r.queries = oracle.used();
  fill_norms(r, x);
  return r;
}

AttackResult run_attack(const AttackSpec& spec, const Model& model, ConstVecView x, int y,
                        const ConstraintSchema& schema, Seed seed) {
  if (x.size() != schema.dim() || x.size() != model.dim())
    throw Error("attack: input dimension does not match schema/model");
  if (requires_gradients(spec.kind) && !model.differentiable())
    throw Error("attack " + to_string(spec.kind) + " requires a differentiable model, got " +
                to_string(model.kind()));
  if (spec.params.eps < 0) throw Error("attack: eps must be >= 0");
  if (y != kMalicious) {
    AttackResult r;
    r.x_adv.assign(x.begin(), x.end());
    return r;
  }
  switch (spec.kind) {
    case AttackKind::kFgsm: return fgsm(model, x, y, spec.params, schema, seed);
    case AttackKind::kPgd: return pgd(model, x, y, spec.params, schema, seed);
    case AttackKind::kBim: return bim(model, x, y, spec.params, schema, seed);
    case AttackKind::kCw: return cw(model, x, y, spec.params, schema, seed);
    case AttackKind::kDeepFool: return deepfool(model, x, y, spec.params, schema, seed);
    case AttackKind::kJsma: return jsma(model, x, y, spec.params, schema, seed);
    case AttackKind::kZoo: return zoo(model, x, y, spec.params, schema, seed);
    case AttackKind::kNes: return nes(model, x, y, spec.params, schema, seed);
    case AttackKind::kZosgd: return zosgd(model, x, y, spec.params, schema, seed);
    case AttackKind::kZoAdamm: return zoadamm(model, x, y, spec.params, schema, seed);
    case AttackKind::kBoundary: return boundary_attack(model, x, y, spec.params, schema, seed);
    case AttackKind::kHsja: return hsja(model, x, y, spec.params, schema, seed);
  }
  throw Error("attack: unsupported kind");
}

}  // namespace advkit
