#include "advkit/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "advkit/ensemble_attacks.hpp"
#include "advkit/eval.hpp"

namespace advkit::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Seed streams per pipeline stage.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kTrainStream = 100;
constexpr std::uint64_t kAttackStream = 200;
constexpr std::uint64_t kDefendStream = 300;
constexpr std::uint64_t kMatrixStream = 400;
constexpr std::uint64_t kArmsStream = 500;

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw Error(where + ": " + msg);
}

void check_fields(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      fail(where + "." + key, "unknown field");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key, "wrong type (" + std::string(j.at(key).type_name()) + ")");
  }
}

template <class T>
T require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) fail(where + "." + key, "missing");
  return get<T>(j, key, where, T{});
}

std::vector<std::string> name_list(const json& j, const std::string& key, const std::string& where) {
  return get<std::vector<std::string>>(j, key, where, {});
}

// Rewrap library validation errors with the config path.
template <class F>
auto at_path(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    fail(where, e.what());
  } catch (const json::exception& e) {
    fail(where, e.what());
  }
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

std::string pct(double v) { return format_percent(v); }

std::string join(const Vec& v, const char* sep = ";") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + fmt(v[i]);
  return s;
}

std::string trace_csv(const BayesOptTrace& t) {
  std::ostringstream os;
  t.write_csv(os);
  return os.str();
}

// (x, y) series of the best value found so far.
std::string best_series(const BayesOptTrace& t) {
  std::string s = "x,y\n";
  for (std::size_t i = 0; i < t.steps.size(); ++i) s += std::to_string(i) + "," + fmt(t.steps[i].best_so_far) + "\n";
  return s;
}

// (x, y) = (w_0, objective) per evaluation.
std::string weight_series(const BayesOptTrace& t) {
  std::string s = "x,y\n";
  for (const auto& st : t.steps) s += fmt(st.w.empty() ? 0.0 : st.w[0]) + "," + fmt(st.value) + "\n";
  return s;
}

struct Data {
  ConstraintSchema schema;
  Split parts;
};

Data load_data(const Config& cfg) {
  if (cfg.synth) {
    Dataset ds = at_path("config.data.synth", [&] { return synth(*cfg.synth, Seed{cfg.seed}); });
    return {ConstraintSchema::box(cfg.synth->d), split(ds, cfg.split, derive(Seed{cfg.seed}, kSplitStream))};
  }
  ConstraintSchema schema = at_path("config.data.schema", [&] { return load_schema(cfg.schema_path); });
  Dataset ds = at_path("config.data.csv", [&] { return load_csv(cfg.csv_path, schema); });
  return {schema, split(ds, cfg.split, derive(Seed{cfg.seed}, kSplitStream))};
}

fs::path model_path(const ReportWriter& out, const std::string& name) {
  return out.root() / "models" / (name + ".json");
}

ModelPtr load_named(const ReportWriter& out, const std::string& name) {
  const fs::path p = model_path(out, name);
  if (!fs::exists(p))
    throw Error("model '" + name + "' not found at models/" + name + ".json (run 'train' or 'defend' first)");
  return load_model(p.string());
}

void write_model(ReportWriter& out, const std::string& name, const Model& m, const json& prov) {
  json j = model_to_json(m);
  j["provenance"] = prov;
  out.write("models/" + name + ".json", j.dump(1) + "\n");
}

std::vector<AttackSpec> specs(const Config& cfg, const std::vector<std::string>& names,
                              const std::string& where) {
  std::vector<AttackSpec> out;
  for (std::size_t i = 0; i < names.size(); ++i)
    out.push_back(cfg.attack(names[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

ModelKind model_kind(const json& j, const std::string& key, const std::string& where) {
  const auto name = require<std::string>(j, key, where);
  return at_path(where + "." + key, [&] { return parse_model_kind(name); });
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"train", "attack", "defend", "matrix", "armsrace"};
  return names;
}

ReportWriter::ReportWriter(fs::path root) : root_(std::move(root)) {
  for (const char* d : {"models", "results", "traces", "reports"}) fs::create_directories(root_ / d);
}

void ReportWriter::write(const std::string& rel, const std::string& content) {
  std::lock_guard<std::mutex> lock(mu_);
  const fs::path p = root_ / rel;
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  f << content;
  if (!f) throw Error("write failed for '" + p.string() + "'");
  written_.emplace_back(rel, fnv1a_hex(content));
}

std::vector<std::pair<std::string, std::string>> ReportWriter::written() const {
  std::lock_guard<std::mutex> lock(mu_);
  return written_;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const json& config) { return fnv1a_hex(config.dump()); }

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

const AttackSpec& Config::attack(const std::string& name, const std::string& where) const {
  auto it = attacks.find(name);
  if (it == attacks.end()) {
    std::string known;
    for (const auto& n : attack_order) known += (known.empty() ? "" : ", ") + n;
    fail(where, "unknown attack '" + name + "' (defined: " + (known.empty() ? "none" : known) + ")");
  }
  return it->second;
}

BayesOptConfig bayesopt_from_json(const json& j, const std::string& where) {
  check_fields(j, where, {"budget", "n_init", "mode", "kappa", "delta", "lambda", "candidates",
                          "lengthscale", "variance", "standardize"});
  BayesOptConfig bo;
  bo.budget = get(j, "budget", where, bo.budget);
  bo.n_init = get(j, "n_init", where, bo.n_init);
  if (j.contains("mode")) {
    const auto m = get<std::string>(j, "mode", where, "");
    bo.mode = at_path(where + ".mode", [&] { return parse_acquisition(m); });
  }
  bo.kappa = get(j, "kappa", where, bo.kappa);
  bo.delta = get(j, "delta", where, bo.delta);
  bo.lambda = get(j, "lambda", where, bo.lambda);
  bo.candidates = get(j, "candidates", where, bo.candidates);
  bo.kernel.lengthscale = get(j, "lengthscale", where, bo.kernel.lengthscale);
  bo.kernel.variance = get(j, "variance", where, bo.kernel.variance);
  bo.standardize = get(j, "standardize", where, bo.standardize);
  if (bo.budget == 0) fail(where + ".budget", "must be >= 1");
  if (bo.delta <= 0) fail(where + ".delta", "must be > 0");
  if (bo.kernel.lengthscale <= 0 || bo.kernel.variance <= 0) fail(where, "kernel parameters must be > 0");
  return bo;
}

AtConfig at_from_json(const json& j, const std::string& where) {
  check_fields(j, where, {"hyper", "epochs", "finetune_epochs", "adv_fraction", "max_adv", "zo_fallback"});
  AtConfig at;
  if (j.contains("hyper"))
    at.hp = at_path(where + ".hyper", [&] { return HyperParams::from_json(j.at("hyper")); });
  at.epochs = get(j, "epochs", where, at.epochs);
  at.finetune_epochs = get(j, "finetune_epochs", where, at.finetune_epochs);
  at.adv_fraction = get(j, "adv_fraction", where, at.adv_fraction);
  at.max_adv = get(j, "max_adv", where, at.max_adv);
  at.zo_fallback = get(j, "zo_fallback", where, at.zo_fallback);
  if (!(at.adv_fraction >= 0 && at.adv_fraction <= 1)) fail(where + ".adv_fraction", "must be in [0, 1]");
  return at;
}

json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config '" + path + "': " + e.what());
  }
  if (j.is_object() && j.value("kind", "") == kManifestKind) {
    if (!j.contains("config")) throw Error("manifest '" + path + "': missing config");
    return j.at("config");
  }
  if (j.is_object() && j.contains("data") && j["data"].is_object()) {
    const fs::path base = fs::absolute(path).parent_path();
    for (const char* k : {"csv", "schema"})
      if (j["data"].contains(k) && j["data"][k].is_string()) {
        fs::path p = j["data"][k].get<std::string>();
        if (p.is_relative()) j["data"][k] = (base / p).lexically_normal().string();
      }
  }
  return j;
}

Config parse_config(const json& j) {
  const std::string root = "config";
  check_fields(j, root, {"seed", "data", "models", "attacks", "attack", "defenses", "matrix", "armsrace"});
  Config c;
  c.raw = j;
  c.seed = get<std::uint64_t>(j, "seed", root, 0);

  const std::string dw = root + ".data";
  const json& d = j.contains("data") ? j.at("data") : json::object();
  check_fields(d, dw, {"synth", "csv", "schema", "split"});
  if (d.contains("synth") == d.contains("csv")) fail(dw, "exactly one of 'synth' or 'csv' is required");
  if (d.contains("synth")) {
    const std::string sw = dw + ".synth";
    const json& s = d.at("synth");
    check_fields(s, sw, {"n_per_class", "d", "separation", "noise", "direction"});
    SynthSpec sp;
    sp.n_per_class = get(s, "n_per_class", sw, sp.n_per_class);
    sp.d = get(s, "d", sw, sp.d);
    sp.separation = get(s, "separation", sw, sp.separation);
    sp.noise = get(s, "noise", sw, sp.noise);
    if (s.contains("direction")) sp.direction = get<Vec>(s, "direction", sw, {});
    c.synth = sp;
  } else {
    c.csv_path = require<std::string>(d, "csv", dw);
    c.schema_path = require<std::string>(d, "schema", dw);
  }
  if (d.contains("split")) {
    const auto v = get<std::vector<unsigned>>(d, "split", dw, {});
    if (v.size() != 3) fail(dw + ".split", "expected three ratios");
    c.split = {v[0], v[1], v[2]};
  }

  std::set<std::string> seen;
  if (j.contains("models")) {
    const json& ms = j.at("models");
    if (!ms.is_array()) fail(root + ".models", "expected an array");
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::string w = root + ".models[" + std::to_string(i) + "]";
      check_fields(ms[i], w, {"name", "kind", "hyper"});
      NamedModelSpec m;
      m.name = require<std::string>(ms[i], "name", w);
      m.kind = model_kind(ms[i], "kind", w);
      if (ms[i].contains("hyper"))
        m.hp = at_path(w + ".hyper", [&] { return HyperParams::from_json(ms[i].at("hyper")); });
      if (!seen.insert(m.name).second) fail(w + ".name", "duplicate name '" + m.name + "'");
      c.models.push_back(std::move(m));
    }
  }

  if (j.contains("attacks")) {
    const json& as = j.at("attacks");
    if (!as.is_array()) fail(root + ".attacks", "expected an array");
    for (std::size_t i = 0; i < as.size(); ++i) {
      const std::string w = root + ".attacks[" + std::to_string(i) + "]";
      check_fields(as[i], w, {"name", "kind", "params"});
      const auto kind_name = require<std::string>(as[i], "kind", w);
      const AttackKind kind = at_path(w + ".kind", [&] { return parse_attack_kind(kind_name); });
      const auto name = get<std::string>(as[i], "name", w, kind_name);
      AttackSpec spec = AttackSpec::with_defaults(kind);
      if (as[i].contains("params"))
        spec.params = at_path(w + ".params",
                              [&] { return AttackParams::from_json(as[i].at("params"), spec.params); });
      if (!c.attacks.emplace(name, spec).second) fail(w + ".name", "duplicate name '" + name + "'");
      c.attack_order.push_back(name);
    }
  }

  if (j.contains("attack")) {
    const std::string w = root + ".attack";
    const json& a = j.at("attack");
    check_fields(a, w, {"models", "attacks", "adaptive"});
    c.attack_models = name_list(a, "models", w);
    c.attack_attacks = name_list(a, "attacks", w);
    for (std::size_t i = 0; i < c.attack_attacks.size(); ++i)
      c.attack(c.attack_attacks[i], w + ".attacks[" + std::to_string(i) + "]");
    if (a.contains("adaptive")) c.adaptive = bayesopt_from_json(a.at("adaptive"), w + ".adaptive");
  }

  if (j.contains("defenses")) {
    const json& ds = j.at("defenses");
    if (!ds.is_array()) fail(root + ".defenses", "expected an array");
    static const std::set<std::string> kMethods = {"nat", "avg_at", "max_at", "r_at", "te_at"};
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::string w = root + ".defenses[" + std::to_string(i) + "]";
      check_fields(ds[i], w, {"name", "method", "kind", "attacks", "weights", "substitutes", "at",
                              "bayesopt", "eval_epoch_fraction"});
      DefenseSpec s;
      s.name = require<std::string>(ds[i], "name", w);
      s.method = require<std::string>(ds[i], "method", w);
      if (!kMethods.count(s.method))
        fail(w + ".method", "unknown method '" + s.method + "' (valid: nat, avg_at, max_at, r_at, te_at)");
      s.kind = model_kind(ds[i], "kind", w);
      s.attacks = name_list(ds[i], "attacks", w);
      if (s.attacks.empty()) fail(w + ".attacks", "at least one attack is required");
      for (std::size_t k = 0; k < s.attacks.size(); ++k)
        c.attack(s.attacks[k], w + ".attacks[" + std::to_string(k) + "]");
      if ((s.method == "nat" || s.method == "te_at") && s.attacks.size() != 1)
        fail(w + ".attacks", s.method + " takes exactly one attack");
      s.weights = get<Vec>(ds[i], "weights", w, {});
      s.substitutes = name_list(ds[i], "substitutes", w);
      if (s.method == "te_at") {
        if (s.substitutes.empty()) fail(w + ".substitutes", "te_at needs at least one substitute");
        if (s.weights.empty()) s.weights = uniform_weights(s.substitutes.size());
        if (s.weights.size() != s.substitutes.size()) fail(w + ".weights", "length must match substitutes");
      } else if (s.method == "avg_at") {
        if (s.weights.empty()) s.weights = uniform_weights(s.attacks.size());
        if (s.weights.size() != s.attacks.size()) fail(w + ".weights", "length must match attacks");
      }
      for (double v : s.weights)
        if (!(v >= 0)) fail(w + ".weights", "weights must be nonnegative");
      if (ds[i].contains("at")) s.at = at_from_json(ds[i].at("at"), w + ".at");
      if (ds[i].contains("bayesopt")) s.bo = bayesopt_from_json(ds[i].at("bayesopt"), w + ".bayesopt");
      s.eval_epoch_fraction = get(ds[i], "eval_epoch_fraction", w, s.eval_epoch_fraction);
      if (!seen.insert(s.name).second) fail(w + ".name", "duplicate name '" + s.name + "'");
      c.defenses.push_back(std::move(s));
    }
  }

  if (j.contains("matrix")) {
    const std::string w = root + ".matrix";
    const json& m = j.at("matrix");
    check_fields(m, w, {"attacks", "defenses"});
    c.matrix_attacks = name_list(m, "attacks", w);
    c.matrix_defenses = name_list(m, "defenses", w);
    for (std::size_t k = 0; k < c.matrix_attacks.size(); ++k)
      c.attack(c.matrix_attacks[k], w + ".attacks[" + std::to_string(k) + "]");
  }

  if (j.contains("armsrace")) {
    const std::string w = root + ".armsrace";
    const json& a = j.at("armsrace");
    check_fields(a, w, {"kind", "attacks", "rounds", "at", "defense_bayesopt", "attack_bayesopt"});
    ArmsRaceSpec s;
    s.kind = model_kind(a, "kind", w);
    s.attacks = name_list(a, "attacks", w);
    if (s.attacks.empty()) fail(w + ".attacks", "at least one attack is required");
    for (std::size_t k = 0; k < s.attacks.size(); ++k)
      c.attack(s.attacks[k], w + ".attacks[" + std::to_string(k) + "]");
    s.rounds = get(a, "rounds", w, s.rounds);
    if (s.rounds == 0) fail(w + ".rounds", "must be >= 1");
    if (a.contains("at")) s.at = at_from_json(a.at("at"), w + ".at");
    if (a.contains("defense_bayesopt"))
      s.defense_bo = bayesopt_from_json(a.at("defense_bayesopt"), w + ".defense_bayesopt");
    if (a.contains("attack_bayesopt"))
      s.attack_bo = bayesopt_from_json(a.at("attack_bayesopt"), w + ".attack_bayesopt");
    c.armsrace = s;
  }
  return c;
}

std::string default_out_root() {
  const char* env = std::getenv(kOutEnv);
  return env && *env ? env : "advkit_out";
}

void cmd_train(const Config& cfg, ReportWriter& out) {
  if (cfg.models.empty()) throw Error("config.models: nothing to train");
  const Data data = load_data(cfg);
  std::string csv = "model,kind,accuracy,precision,recall,f1,odr,train_rows,test_rows\n";
  json summary = json::array();
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    const auto& m = cfg.models[i];
    const Seed s = derive(Seed{cfg.seed}, kTrainStream + i);
    ModelPtr model = train(m.kind, m.hp, data.parts.train, s);
    const DetectionStats st = detection_stats(*model, data.parts.test);
    const double o = odr(*model, data.parts.test);
    write_model(out, m.name, *model,
                {{"name", m.name}, {"kind", to_string(m.kind)}, {"hyper", m.hp.to_json()}, {"seed", s.value}});
    csv += csv_row({m.name, to_string(m.kind), pct(st.accuracy), pct(st.precision), pct(st.recall),
                    pct(st.f1), pct(o), std::to_string(data.parts.train.size()),
                    std::to_string(data.parts.test.size())});
    summary.push_back({{"model", m.name}, {"accuracy", st.accuracy}, {"odr", o}});
  }
  out.write("results/train.csv", csv);
  out.write("reports/train.json", json{{"command", "train"}, {"models", summary}}.dump(1) + "\n");
}

void cmd_attack(const Config& cfg, ReportWriter& out) {
  const std::vector<std::string> model_names = [&] {
    if (!cfg.attack_models.empty()) return cfg.attack_models;
    std::vector<std::string> v;
    for (const auto& m : cfg.models) v.push_back(m.name);
    return v;
  }();
  const std::vector<std::string> attack_names_ = cfg.attack_attacks.empty() ? cfg.attack_order : cfg.attack_attacks;
  if (model_names.empty()) throw Error("config.attack.models: no models to attack");
  if (attack_names_.empty()) throw Error("config.attack.attacks: no attacks defined");
  const Data data = load_data(cfg);
  const AttackInputs in = malicious_inputs(data.parts.test);
  if (in.xs.empty()) throw Error("attack: test split has no malicious rows");

  std::string samples = "model,attack,row,success,queries,linf,l1,l2,flags\n";
  std::string summary = "model,attack,asr,dsr,mean_queries\n";
  json report = json::array();
  for (std::size_t m = 0; m < model_names.size(); ++m) {
    const ModelPtr model = load_named(out, model_names[m]);
    const Seed ms = derive(Seed{cfg.seed}, kAttackStream + m);
    std::vector<AttackSpec> list;
    for (std::size_t a = 0; a < attack_names_.size(); ++a) {
      const AttackSpec& spec = cfg.attack(attack_names_[a], "config.attack.attacks[" + std::to_string(a) + "]");
      if (requires_gradients(spec.kind) && capability_of(model->kind()) == Capability::kQueryOnly)
        throw Error("config.attack.attacks[" + std::to_string(a) + "]: attack '" + attack_names_[a] +
                    "' needs gradients but model '" + model_names[m] + "' is query-only");
      list.push_back(spec);
      const auto res = attack_batch(spec, *model, in.xs, in.ys, data.schema, derive(ms, a));
      double q = 0;
      for (std::size_t i = 0; i < res.size(); ++i) {
        const auto& r = res[i];
        q += static_cast<double>(r.queries);
        std::string flags;
        for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
        samples += csv_row({model_names[m], attack_names_[a], std::to_string(i), r.success ? "1" : "0",
                            std::to_string(r.queries), fmt(r.linf), fmt(r.l1), fmt(r.l2), flags});
      }
      const double a_asr = asr(res);
      summary += csv_row({model_names[m], attack_names_[a], pct(a_asr), pct(100 - a_asr),
                          fmt(q / static_cast<double>(res.size()))});
      report.push_back({{"model", model_names[m]}, {"attack", attack_names_[a]}, {"asr", a_asr}});
    }
    if (cfg.adaptive) {
      AdpEaOptions opt;
      opt.bo = *cfg.adaptive;
      const AdpEaResult r = adp_ea(list, *model, data.parts.test, data.schema, opt, derive(ms, 1000));
      summary += csv_row({model_names[m], "adp_ea", pct(r.asr), pct(100 - r.asr), ""});
      out.write("traces/adp_ea_" + model_names[m] + ".csv", trace_csv(r.trace));
      out.write("reports/plots/adp_ea_" + model_names[m] + "_best.csv", best_series(r.trace));
      report.push_back({{"model", model_names[m]}, {"attack", "adp_ea"}, {"asr", r.asr}, {"weights", r.weights}});
    }
  }
  out.write("results/attack_samples.csv", samples);
  out.write("results/attack_summary.csv", summary);
  out.write("reports/attack.json", json{{"command", "attack"}, {"cells", report}}.dump(1) + "\n");
}

void cmd_defend(const Config& cfg, ReportWriter& out) {
  if (cfg.defenses.empty()) throw Error("config.defenses: nothing to run");
  const Data data = load_data(cfg);
  std::string summary = "defense,method,kind,accuracy,odr,dsr_all\n";
  std::string per_attack = "defense,attack,dsr\n";
  json report = json::array();
  for (std::size_t d = 0; d < cfg.defenses.size(); ++d) {
    const DefenseSpec& s = cfg.defenses[d];
    const std::string w = "config.defenses[" + std::to_string(d) + "]";
    const Seed ds = derive(Seed{cfg.seed}, kDefendStream + d);
    const auto atk = specs(cfg, s.attacks, w + ".attacks");
    ModelPtr model;
    json prov;
    std::vector<AtRound> rounds;
    if (s.method == "nat") {
      auto r = at_path(w, [&] { return nat(s.kind, data.parts.train, atk[0], data.schema, s.at, ds); });
      model = r.model, prov = r.provenance, rounds = r.rounds;
    } else if (s.method == "avg_at") {
      auto r = at_path(w, [&] { return avg_at(s.kind, data.parts.train, atk, s.weights, data.schema, s.at, ds); });
      model = r.model, prov = r.provenance, rounds = r.rounds;
    } else if (s.method == "max_at") {
      auto r = at_path(w, [&] { return max_at(s.kind, data.parts.train, atk, data.schema, s.at, ds); });
      model = r.model, prov = r.provenance, rounds = r.rounds;
    } else if (s.method == "r_at") {
      RAtOptions ro;
      ro.bo = s.bo;
      ro.eval_epoch_fraction = s.eval_epoch_fraction;
      auto r = at_path(w, [&] {
        return r_at(s.kind, data.parts.train, data.parts.val, atk, data.schema, s.at, ro, ds);
      });
      model = r.model, prov = r.provenance;
      out.write("traces/" + s.name + "_bayesopt.csv", trace_csv(r.trace));
      out.write("reports/plots/" + s.name + "_dsr_vs_weight.csv", weight_series(r.trace));
      out.write("reports/plots/" + s.name + "_best.csv", best_series(r.trace));
    } else {
      std::vector<ModelPtr> subs;
      for (const auto& n : s.substitutes) subs.push_back(load_named(out, n));
      auto r = at_path(w, [&] {
        return te_at(s.kind, data.parts.train, subs, s.weights, atk[0], data.schema, s.at, ds);
      });
      model = r.model, prov = r.provenance;
    }
    if (!rounds.empty()) {
      std::string t = "round,attack,loss\n";
      for (std::size_t e = 0; e < rounds.size(); ++e)
        for (std::size_t k = 0; k < rounds[e].attack_loss.size(); ++k)
          t += csv_row({std::to_string(e), s.attacks[k], fmt(rounds[e].attack_loss[k])});
      out.write("traces/" + s.name + "_rounds.csv", t);
    }
    prov["defense"] = s.name;
    write_model(out, s.name, *model, prov);

    const double all = dsr_all(*model, data.parts.test, atk, data.schema, derive(ds, 7));
    const DetectionStats st = detection_stats(*model, data.parts.test);
    const double o = odr(*model, data.parts.test);
    summary += csv_row({s.name, s.method, to_string(s.kind), pct(st.accuracy), pct(o), pct(100 * all)});
    const AttackInputs in = malicious_inputs(data.parts.test);
    json per = json::object();
    for (std::size_t k = 0; k < atk.size(); ++k) {
      const double v = dsr(attack_batch(atk[k], *model, in.xs, in.ys, data.schema, derive(ds, 100 + k)));
      per_attack += csv_row({s.name, s.attacks[k], pct(v)});
      per[s.attacks[k]] = v;
    }
    report.push_back({{"defense", s.name}, {"method", s.method}, {"odr", o}, {"dsr_all", all}, {"dsr", per}});
  }
  out.write("results/defense_summary.csv", summary);
  out.write("results/defense_dsr.csv", per_attack);
  out.write("reports/defend.json", json{{"command", "defend"}, {"defenses", report}}.dump(1) + "\n");
}

void cmd_matrix(const Config& cfg, ReportWriter& out) {
  if (cfg.matrix_attacks.empty()) throw Error("config.matrix.attacks: empty axis");
  if (cfg.matrix_defenses.empty()) throw Error("config.matrix.defenses: empty axis");
  const Data data = load_data(cfg);
  std::vector<NamedAttack> atk;
  for (std::size_t i = 0; i < cfg.matrix_attacks.size(); ++i)
    atk.push_back({cfg.matrix_attacks[i], cfg.attack(cfg.matrix_attacks[i], "config.matrix.attacks[" + std::to_string(i) + "]")});
  std::vector<NamedModel> models;
  for (const auto& n : cfg.matrix_defenses) models.push_back({n, load_named(out, n)});
  const TransferMatrix tm = transfer_matrix(atk, models, data.parts.test, data.schema,
                                            derive(Seed{cfg.seed}, kMatrixStream));
  std::ostringstream os;
  tm.write_csv(os);
  out.write("results/matrix.csv", os.str());
  // Diagonal dominance is reported only when row and column names pair up.
  json diag = json::array();
  for (std::size_t i = 0; i < tm.attacks.size() && i < tm.defenses.size(); ++i) {
    const auto& row = tm.cells[i];
    diag.push_back({{"attack", tm.attacks[i]}, {"defense", tm.defenses[i]},
                    {"diagonal_is_row_max", row[i] >= *std::max_element(row.begin(), row.end())}});
  }
  out.write("reports/matrix.json",
            json{{"command", "matrix"}, {"attacks", tm.attacks}, {"defenses", tm.defenses},
                 {"cells", tm.cells}, {"diagonal", diag}}.dump(1) + "\n");
}

void cmd_armsrace(const Config& cfg, ReportWriter& out) {
  if (!cfg.armsrace) throw Error("config.armsrace: missing");
  const ArmsRaceSpec& s = *cfg.armsrace;
  const Data data = load_data(cfg);
  const auto atk = specs(cfg, s.attacks, "config.armsrace.attacks");
  const Seed base = derive(Seed{cfg.seed}, kArmsStream);

  ModelPtr current = train(s.kind, s.at.hp, data.parts.train, derive(base, 0));
  std::string csv = "round,attacker_weights,asr_before,defender_weights,asr_after,dsr_after,odr_after\n";
  json rounds = json::array();
  for (std::size_t r = 0; r < s.rounds; ++r) {
    const Seed rs = derive(base, 10 + r);
    AdpEaOptions ao;
    ao.bo = s.attack_bo;
    const AdpEaResult before = adp_ea(atk, *current, data.parts.test, data.schema, ao, derive(rs, 1));
    AtConfig at = s.at;
    at.initial = current;
    RAtOptions ro;
    ro.bo = s.defense_bo;
    const RAtResult def = r_at(s.kind, data.parts.train, data.parts.val, atk, data.schema, at, ro, derive(rs, 2));
    const AdpEaResult after = adp_ea(atk, *def.model, data.parts.test, data.schema, ao, derive(rs, 3));
    const double o = odr(*def.model, data.parts.test);
    csv += csv_row({std::to_string(r), join(before.weights), pct(before.asr), join(def.weights),
                    pct(after.asr), pct(100 - after.asr), pct(o)});
    const std::string tag = "armsrace_r" + std::to_string(r);
    out.write("traces/" + tag + "_attack.csv", trace_csv(before.trace));
    out.write("traces/" + tag + "_defense.csv", trace_csv(def.trace));
    out.write("reports/plots/" + tag + "_dsr_vs_weight.csv", weight_series(def.trace));
    rounds.push_back({{"round", r}, {"attacker_weights", before.weights}, {"asr_before", before.asr},
                      {"defender_weights", def.weights}, {"asr_after", after.asr}, {"odr_after", o}});
    current = def.model;
  }
  json prov = {{"command", "armsrace"}, {"kind", to_string(s.kind)}, {"rounds", s.rounds}};
  write_model(out, "armsrace_final", *current, prov);
  out.write("results/armsrace.csv", csv);
  out.write("reports/armsrace.json", json{{"command", "armsrace"}, {"rounds", rounds}}.dump(1) + "\n");
}

fs::path run(const std::string& command, const RunOptions& options) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    std::string valid;
    for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
    throw Error("unknown command '" + command + "' (valid: " + valid + ")");
  }
  if (options.config_path.empty()) throw Error("--config is required");
  json raw = read_config(options.config_path);
  if (options.seed) raw["seed"] = *options.seed;
  const Config cfg = parse_config(raw);
  if (options.jobs < 0) throw Error("--jobs must be >= 0");
  if (options.jobs > 0) omp_set_num_threads(options.jobs);

  ReportWriter out(options.out ? *options.out : default_out_root());
  if (command == "train") cmd_train(cfg, out);
  else if (command == "attack") cmd_attack(cfg, out);
  else if (command == "defend") cmd_defend(cfg, out);
  else if (command == "matrix") cmd_matrix(cfg, out);
  else cmd_armsrace(cfg, out);

  json outputs = json::array();
  for (const auto& [rel, digest] : out.written()) outputs.push_back({{"path", rel}, {"fnv1a", digest}});
  const json manifest = {
      {"kind", kManifestKind},
      {"command", command},
      {"seed", cfg.seed},
      {"config_hash", config_hash(raw)},
      {"versions", {{"advkit", kVersion}, {"model_format", kModelFormatVersion},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
      {"config", raw},
      {"outputs", outputs},
  };
  out.write("manifest_" + command + ".json", manifest.dump(1) + "\n");
  return out.root();
}

}  // namespace advkit::cli
