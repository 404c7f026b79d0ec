// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Usage: acceptance <advkit executable> <config.json> [work dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "advkit/attacks_zo.hpp"
#include "advkit/bayesopt.hpp"
#include "advkit/defense.hpp"
#include "advkit/ensemble_attacks.hpp"
#include "advkit/eval.hpp"
#include "advkit/models.hpp"
#include "support/fd_oracle.hpp"

using namespace advkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string printf_str(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_l2(ConstVecView est, ConstVecView truth) { return norm_l2(sub(est, truth)) / norm_l2(truth); }

Vec random_vec(std::size_t d, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> U(lo, hi);
  Vec v(d);
  for (double& x : v) x = U(rng);
  return v;
}

// 1 -------------------------------------------------------------------------

Outcome gradients() {
  const Dataset ds = synth({.n_per_class = 150, .d = 5, .separation = 0.3, .noise = 0.2}, Seed{21});
  HyperParams hp;
  hp.epochs = 40;
  Rng rng = make_rng(Seed{99});
  bool ok = true;
  std::string detail;
  for (ModelKind kind : {ModelKind::kLR, ModelKind::kLinearSVM, ModelKind::kMLP, ModelKind::kDeepEns}) {
    const ModelPtr m = train(kind, hp, ds, Seed{4});
    double worst = 0;
    const int points = 200;
    int near_kink = 0;
    for (int k = 0; k < points;) {
      const Vec x = random_vec(5, rng, 0, 1);
      // Redraw points whose stencil could straddle a ReLU kink.
      if (advkit::testing::relu_margin(*m, x) < 1e-3) {
        ++near_kink;
        continue;
      }
      worst = std::max(worst, advkit::testing::gradient_relative_error(*m, x, k % 2));
      ++k;
    }
    ok = ok && worst < 1e-4;
    detail += printf_str("%s %d pts worst %.1e (%d redrawn); ", to_string(kind).c_str(), points, worst, near_kink);
  }
  return {ok, detail};
}

// 2 -------------------------------------------------------------------------

Outcome zo_calibration() {
  double nes_worst = 0, zosgd_worst = 0, zoo_worst = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng = make_rng(Seed{s});
    const std::size_t d = 5;
    const Vec a = random_vec(d, rng, -3, 3);
    const Objective f = [&](ConstVecView x) { return dot(a, x); };
    const Vec x = random_vec(d, rng, 0, 1);

    const auto pairs = antithetic_population(2 * 10000, d, rng);
    nes_worst = std::max(nes_worst, rel_l2(nes_estimate(f, x, 0.01, pairs), a));

    const auto sphere = sphere_directions(50000, d, rng);
    zosgd_worst = std::max(zosgd_worst, rel_l2(zosgd_estimate(f, x, 0.01, sphere), scaled(a, 1.0 / double(d))));
  }
  // Random quadratics x'Qx + b'x + c.
  Rng rng = make_rng(Seed{77});
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + t % 6;
    std::vector<Vec> Q;
    for (std::size_t i = 0; i < d; ++i) Q.push_back(random_vec(d, rng, -2, 2));
    const Vec b = random_vec(d, rng, -2, 2);
    const double c = random_vec(1, rng, -1, 1)[0];
    const Objective f = [&](ConstVecView x) {
      double v = c + dot(b, x);
      for (std::size_t i = 0; i < d; ++i) v += x[i] * dot(Q[i], x);
      return v;
    };
    const Vec x = random_vec(d, rng, 0, 1);
    const double h = std::uniform_real_distribution<double>(1e-3, 0.2)(rng);
    for (std::size_t i = 0; i < d; ++i) {
      double g = b[i];
      for (std::size_t j = 0; j < d; ++j) g += (Q[i][j] + Q[j][i]) * x[j];
      zoo_worst = std::max(zoo_worst, std::abs(symmetric_difference(f, x, i, h) - g));
    }
  }
  const bool ok = nes_worst < 0.05 && zosgd_worst < 0.05 && zoo_worst <= 1e-12;
  return {ok, printf_str("NES rel err %.4f (10000 pairs), ZOSGD rel err to a/d %.4f (50000 dirs), ZOO max abs err %.1e",
                         nes_worst, zosgd_worst, zoo_worst)};
}

// 3 -------------------------------------------------------------------------

Outcome constraint_safety() {
  const std::vector<std::string> names{"total", "count", "ratio", "proto", "pkt", "free", "tail", "spare"};
  std::vector<FeatureSpec> fs{
      {"total", FeatureGroup::kIndependent, 0, 1, std::nullopt},
      {"count", FeatureGroup::kIndependent, 0, 1, std::nullopt},
      {"ratio", FeatureGroup::kDependent, 0, 1, std::nullopt},
      {"proto", FeatureGroup::kUncontrollable, 0, 1, std::nullopt},
      {"pkt", FeatureGroup::kPacketDerived, 0, 1, std::nullopt},
      {"free", FeatureGroup::kIndependent, 0, 1, std::nullopt},
      {"tail", FeatureGroup::kIndependent, 0, 1, std::nullopt},
      {"spare", FeatureGroup::kIndependent, 0, 1, std::nullopt},
  };
  fs[2].formula = DependencyFormula::parse("/ total + count 1", names);
  // tail and spare sit outside the mask.
  const ConstraintSchema schema(fs, std::vector<std::size_t>{0, 1, 2, 5});
  const std::vector<std::size_t> frozen{3, 4, 6, 7};

  Dataset ds = synth({.n_per_class = 60, .d = 8, .separation = 0.4, .noise = 0.1}, Seed{41});
  for (auto& s : ds.samples) s.features = schema.remap(s.features, s.features);
  HyperParams hp;
  hp.epochs = 40;
  hp.n_trees = 10;
  hp.n_estimators = 20;
  const ModelPtr mlp = train(ModelKind::kMLP, hp, ds, Seed{42});
  const ModelPtr lr = train(ModelKind::kLR, hp, ds, Seed{43});
  const ModelPtr rf = train(ModelKind::kRandomForest, hp, ds, Seed{44});
  const ModelPtr gbt = train(ModelKind::kGradBoostTrees, hp, ds, Seed{45});
  const auto mal = ds.with_label(kMalicious);

  std::size_t emitted = 0, bad = 0, rejected = 0;
  std::string worst;
  for (const auto& name : attack_names()) {
    const AttackKind ak = parse_attack_kind(name);
    std::vector<ModelPtr> models{mlp, lr};
    if (!requires_gradients(ak)) {
      models.push_back(rf);
      models.push_back(gbt);
    }
    for (Norm norm : {Norm::kL1, Norm::kL2, Norm::kLinf}) {
      for (double eps : {0.05, 0.3, 1.0}) {
        AttackSpec spec = AttackSpec::with_defaults(ak);
        spec.params.norm = norm;
        spec.params.eps = eps;
        spec.params.query_budget = 300;
        spec.params.iterations = std::min<std::size_t>(spec.params.iterations, 50);
        for (const auto& m : models) {
          for (std::size_t i = 0; i < 8; ++i) {
            const Vec& x = mal.samples[i].features;
            AttackResult r;
            try {
              r = run_attack(spec, *m, x, 1, schema, Seed{i});
            } catch (const Error&) {
              ++rejected;  // norm not offered by this attack
              continue;
            }
            ++emitted;
            bool ok = budget_norm(schema, x, r.x_adv, norm) <= eps + 1e-12;
            for (std::size_t j : frozen) ok = ok && r.x_adv[j] == x[j];
            if (!ok) {
              ++bad;
              worst = name;
            }
          }
        }
      }
    }
  }
  return {bad == 0 && emitted > 0,
          printf_str("%zu AEs from %zu attacks (%zu rejected configs), %zu violations%s%s", emitted,
                     attack_names().size(), rejected, bad,
                     bad ? " e.g. " : "", worst.c_str())};
}

// 4 -------------------------------------------------------------------------

Outcome dsr_all_oracle() {
  Rng rng = make_rng(Seed{4});
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = t == 999 ? 6 : 1 + rng() % 6;
    const std::size_t n = t == 999 ? 200 : 1 + rng() % 200;
    const double p = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
    std::vector<std::vector<bool>> b(k, std::vector<bool>(n));
    for (auto& col : b)
      for (std::size_t i = 0; i < n; ++i) col[i] = std::bernoulli_distribution(p)(rng);
    std::size_t resisted = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bool all = true;
      for (std::size_t a = 0; a < k; ++a)
        if (!b[a][i]) all = false;
      resisted += all;
    }
    mismatches += dsr_all_from_bools(b) != double(resisted) / double(n);
  }
  return {mismatches == 0, printf_str("1000 matrices up to 6x200, %zu mismatches", mismatches)};
}

// 5 -------------------------------------------------------------------------

Outcome bayesopt_benchmark() {
  const Vec target{0.3, 0.7};
  const auto quad = [&](const Vec& w) { return -norm_l2(sub(w, target)) * norm_l2(sub(w, target)); };
  // Grid oracle at resolution 0.01.
  Vec oracle{0, 1};
  for (int i = 0; i <= 100; ++i) {
    const Vec w{i / 100.0, 1 - i / 100.0};
    if (quad(w) > quad(oracle)) oracle = w;
  }
  int hits = 0;
  std::size_t max_calls = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::size_t calls = 0;
    BayesOptConfig cfg;
    cfg.budget = 30;
    const auto r = bayesopt_run(
        [&](const Vec& w) {
          ++calls;
          return quad(w);
        },
        2, cfg, Seed{s});
    max_calls = std::max(max_calls, calls);
    hits += norm_linf(sub(r.best_w, oracle)) <= 0.05;
  }
  const double pi2 = std::numbers::pi * std::numbers::pi;
  AcquisitionParams p;
  p.delta = pi2 / 6.0;
  p.best = 0.4;
  const bool beta_zero = gp_ucb_beta(1, 1, pi2 / 6.0) == 0.0 &&
                         acquisition(0.7, 0.3, Acquisition::kGPUCB, p) == 0.7;
  const bool phi_half = normal_cdf(0.0) == 0.5 && acquisition(0.4, 0.2, Acquisition::kPI, p) == 0.5;
  const bool ok = hits >= 19 && max_calls <= 30 && beta_zero && phi_half;
  return {ok, printf_str("%d/20 seeds within 0.05 of grid optimum, <= %zu evals; beta=0 %s; Phi(0)=0.5 %s", hits,
                         max_calls, beta_zero ? "ok" : "wrong", phi_half ? "ok" : "wrong")};
}

// 6 -------------------------------------------------------------------------

Dataset blobs6(std::uint64_t seed, std::size_t n, std::optional<Vec> direction) {
  return synth({.n_per_class = n, .d = 6, .separation = 0.6, .noise = 0.08, .direction = std::move(direction)},
               Seed{seed});
}

Vec steep_direction() {
  Vec dir(6, 1.0);
  dir[0] = 3.0;
  return dir;
}

AttackSpec spec_with(AttackKind kind, double eps) {
  AttackSpec s = AttackSpec::with_defaults(kind);
  s.params.eps = eps;
  return s;
}

Outcome multi_at() {
  const auto schema = ConstraintSchema::box(6);
  const std::vector<AttackSpec> atk{spec_with(AttackKind::kFgsm, 0.15), spec_with(AttackKind::kPgd, 0.3)};
  AtConfig cfg;
  cfg.hp.epochs = 60;
  cfg.epochs = 4;
  cfg.finetune_epochs = 15;
  RAtOptions ro;
  ro.bo.budget = 12;
  ro.bo.n_init = 3;
  AdpEaOptions adversary;
  adversary.bo.budget = 20;

  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto parts = split(blobs6(seed, 400, steep_direction()), {3, 1, 1}, Seed{seed + 100});
    const auto ra = r_at(ModelKind::kMLP, parts.train, parts.val, atk, schema, cfg, ro, Seed{seed});
    const auto av = avg_at(ModelKind::kMLP, parts.train, atk, uniform_weights(2), schema, cfg, Seed{seed});
    const auto mx = max_at(ModelKind::kMLP, parts.train, atk, schema, cfg, Seed{seed});
    const auto defense_rate = [&](const Model& m) {
      return 100.0 - adp_ea(atk, m, parts.test, schema, adversary, Seed{seed + 7}).asr;
    };
    const double r = defense_rate(*ra.model), a = defense_rate(*av.model), m = defense_rate(*mx.model);
    const bool win = r >= a + 5 && r >= m + 5;
    wins += win;
    detail += printf_str("s%llu R %.1f/Avg %.1f/Max %.1f%s; ", (unsigned long long)seed, r, a, m, win ? "" : " (miss)");
  }
  return {wins >= 4, printf_str("%d/5 seeds with margin >= 5: ", wins) + detail};
}

// 7 -------------------------------------------------------------------------

Outcome adp_ea_effective() {
  const std::vector<std::pair<ModelKind, std::vector<AttackKind>>> suite = {
      {ModelKind::kLR, {AttackKind::kFgsm, AttackKind::kDeepFool, AttackKind::kJsma}},
      {ModelKind::kMLP, {AttackKind::kPgd, AttackKind::kCw, AttackKind::kJsma}},
      {ModelKind::kRandomForest, {AttackKind::kNes, AttackKind::kZoo, AttackKind::kBoundary}},
      {ModelKind::kGradBoostTrees, {AttackKind::kZoAdamm, AttackKind::kHsja}},
  };
  const auto schema = ConstraintSchema::box(6);
  std::size_t cases = 0, passed = 0;
  double worst_vs_base = 1e9, worst_vs_grid = 1e9;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto parts = split(blobs6(seed, 200, std::nullopt), {3, 1, 1}, Seed{seed + 100});
    for (const auto& [mk, kinds] : suite) {
      HyperParams hp;
      hp.epochs = 60;
      const ModelPtr m = train(mk, hp, parts.train, Seed{seed});
      std::vector<AttackSpec> atk;
      for (AttackKind k : kinds) {
        AttackSpec s = AttackSpec::with_defaults(k);
        s.params.eps = s.params.norm == Norm::kLinf ? 0.1 : 0.4;
        s.params.iterations = std::min<std::size_t>(s.params.iterations, 300);
        atk.push_back(s);
      }
      const std::size_t n = atk.size();
      AdpEaOptions ao;
      ao.bo.budget = 20;
      const auto adp = adp_ea(atk, *m, parts.test, schema, ao, Seed{seed});

      // Baselines share the per-sample seeds of the Adp-EA perturbation cache.
      const Seed cache_seed = derive(Seed{seed}, 1);
      const auto in = malicious_inputs(parts.test);
      const auto cache = compute_perturbations(atk, *m, in.xs, in.ys, schema, cache_seed);
      double best_single = 0;
      for (std::size_t k = 0; k < n; ++k) {
        std::vector<AttackResult> rs;
        for (std::size_t i = 0; i < in.xs.size(); ++i)
          rs.push_back(run_attack(atk[k], *m, in.xs[i], in.ys[i], schema, derive(derive(cache_seed, i), k)));
        best_single = std::max(best_single, asr(rs));
      }
      const auto batch = [&](Vec p) {
        for (double& v : p) v *= double(n);
        std::vector<AttackResult> rs;
        for (std::size_t i = 0; i < in.xs.size(); ++i) rs.push_back(combine_cached(cache, i, p, atk, *m, schema));
        return asr(rs);
      };
      const double uniform = batch(uniform_weights(n));
      double grid = 0;
      if (n == 2) {
        for (int a = 0; a <= 10; ++a) grid = std::max(grid, batch({a / 10.0, 1 - a / 10.0}));
      } else {
        for (int a = 0; a <= 10; ++a)
          for (int b = 0; a + b <= 10; ++b) grid = std::max(grid, batch({a / 10.0, b / 10.0, (10 - a - b) / 10.0}));
      }
      ++cases;
      const double vs_base = adp.asr - std::max(best_single, uniform), vs_grid = adp.asr - grid;
      worst_vs_base = std::min(worst_vs_base, vs_base);
      worst_vs_grid = std::min(worst_vs_grid, vs_grid);
      passed += vs_base >= -1 && vs_grid >= -2;
    }
  }
  return {passed == cases,
          printf_str("%zu/%zu model-seed cases; worst adp - max(single, uniform) %+.1f, worst adp - grid %+.1f", passed,
                     cases, worst_vs_base, worst_vs_grid)};
}

// 8 -------------------------------------------------------------------------

Outcome nat_effect() {
  const auto schema = ConstraintSchema::box(6);
  const AttackSpec fgsm = spec_with(AttackKind::kFgsm, 0.15);
  AtConfig cfg;
  cfg.hp.epochs = 60;
  int ok = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto parts = split(blobs6(seed, 400, std::nullopt), {3, 1, 1}, Seed{seed + 100});
    AtConfig plain_cfg = cfg;
    plain_cfg.epochs = 0;
    const auto before = nat(ModelKind::kMLP, parts.train, fgsm, schema, plain_cfg, Seed{seed}).model;
    const auto after = nat(ModelKind::kMLP, parts.train, fgsm, schema, cfg, Seed{seed}).model;
    const auto in = malicious_inputs(parts.test);
    const double o0 = odr(*before, parts.test), o1 = odr(*after, parts.test);
    const double d0 = dsr(attack_batch(fgsm, *before, in.xs, in.ys, schema, Seed{1}));
    const double d1 = dsr(attack_batch(fgsm, *after, in.xs, in.ys, schema, Seed{1}));
    const bool pass = o0 - o1 <= 3 && d1 - d0 >= 30;
    ok += pass;
    detail += printf_str("s%llu ODR %.1f->%.1f DSR %.1f->%.1f%s; ", (unsigned long long)seed, o0, o1, d0, d1,
                         pass ? "" : " (miss)");
  }
  return {ok == 5, printf_str("%d/5 seeds: ", ok) + detail};
}

// 9 -------------------------------------------------------------------------

Outcome te_at_ensemble() {
  const auto schema = ConstraintSchema::box(6);
  const AttackSpec jsma = spec_with(AttackKind::kJsma, 0.5);
  AtConfig cfg;
  cfg.hp.epochs = 60;
  const std::vector<ModelKind> kinds{ModelKind::kLR, ModelKind::kLinearSVM, ModelKind::kMLP};
  double ens_sum = 0, single_sum = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto parts = split(blobs6(seed, 400, Vec(6, 1.0)), {3, 1, 1}, Seed{seed + 100});
    std::vector<ModelPtr> subs, sources;
    for (std::size_t k = 0; k < 3; ++k) subs.push_back(train(kinds[k], cfg.hp, parts.train, derive(Seed{seed}, 20 + k)));
    for (std::size_t k = 0; k < 3; ++k)
      sources.push_back(train(kinds[k], cfg.hp, parts.train, derive(Seed{seed}, 40 + k)));
    const ModelPtr ens = te_at(ModelKind::kMLP, parts.train, subs, uniform_weights(3), jsma, schema, cfg, Seed{seed}).model;
    std::vector<ModelPtr> singles;
    for (const auto& s : subs)
      singles.push_back(te_at(ModelKind::kMLP, parts.train, {s}, uniform_weights(1), jsma, schema, cfg, Seed{seed}).model);

    // Held-out transfer attacks: each source alone, then all three together.
    const auto in = malicious_inputs(parts.test);
    std::vector<std::vector<AttackResult>> crafted;
    for (std::size_t k = 0; k < 3; ++k)
      crafted.push_back(tea_craft({sources[k]}, uniform_weights(1), jsma, in.xs, in.ys, schema, derive(Seed{seed}, 60 + k)));
    crafted.push_back(tea_craft(sources, uniform_weights(3), jsma, in.xs, in.ys, schema, derive(Seed{seed}, 70)));

    std::map<std::string, double> e, s;
    for (std::size_t a = 0; a < crafted.size(); ++a) {
      e[std::to_string(a)] = 100 - transfer_asr(*ens, crafted[a]);
      for (std::size_t j = 0; j < singles.size(); ++j)
        s[std::to_string(a) + "/" + std::to_string(j)] = 100 - transfer_asr(*singles[j], crafted[a]);
    }
    const double ev = avg_over_models(e), sv = avg_over_models(s);
    ens_sum += ev;
    single_sum += sv;
    detail += printf_str("s%llu %.1f vs %.1f; ", (unsigned long long)seed, ev, sv);
  }
  const double ens_mean = ens_sum / 5, single_mean = single_sum / 5;
  return {ens_mean >= single_mean,
          printf_str("mean DSR_avg ensemble %.1f vs single %.1f: ", ens_mean, single_mean) + detail};
}

// 10 ------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism(const std::string& exe, const std::string& config, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  const std::vector<std::string> commands{"train", "attack", "defend", "matrix", "armsrace"};
  const auto run = [&](const std::string& cmd, const std::string& cfg, const fs::path& out, int jobs) {
    const std::string line = "\"" + exe + "\" " + cmd + " --config \"" + cfg + "\" --out \"" + out.string() +
                             "\" --jobs " + std::to_string(jobs) + " > \"" + (work / "log.txt").string() + "\" 2>&1";
    if (std::system(line.c_str()) != 0) throw Error("cli failed: " + line + "\n" + slurp(work / "log.txt"));
  };
  // First pass from the config, second pass replays the first pass's manifests.
  for (const auto& c : commands) run(c, config, work / "a", 1);
  for (const auto& c : commands) run(c, (work / "a" / ("manifest_" + c + ".json")).string(), work / "b", 4);

  std::size_t files = 0, differ = 0;
  std::string first;
  for (const auto& e : fs::recursive_directory_iterator(work / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(e.path(), work / "a");
    if (!fs::exists(work / "b" / rel) || slurp(e.path()) != slurp(work / "b" / rel)) {
      ++differ;
      if (first.empty()) first = rel.string();
    }
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(work / "b")) files_b += e.is_regular_file();
  const bool ok = files > 0 && differ == 0 && files == files_b;
  return {ok, printf_str("%zu commands, %zu files compared, %zu differ%s%s", commands.size(), files, differ,
                         first.empty() ? "" : ", first ", first.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <advkit executable> <config.json> [work dir]\n", argv[0]);
    return 2;
  }
  const std::string exe = argv[1], config = argv[2];
  const fs::path work = argc > 3 ? fs::path(argv[3]) : fs::temp_directory_path() / "advkit_acceptance";

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"zeroth-order estimator calibration", zo_calibration},
      {"constraint safety", constraint_safety},
      {"dsr_all oracle equivalence", dsr_all_oracle},
      {"bayesopt simplex benchmark", bayesopt_benchmark},
      {"R-AT beats Avg-AT and Max-AT under Adp-EA", multi_at},
      {"Adp-EA at least as effective as its baselines", adp_ea_effective},
      {"NAT keeps ODR and raises DSR", nat_effect},
      {"TE-AT ensemble substitute vs single substitute", te_at_ensemble},
      {"CLI determinism", [&] { return cli_determinism(exe, config, work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("criterion %zu %s: %s (%.1fs) %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
