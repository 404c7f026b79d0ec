#include <cmath>

#include "doctest.h"

#include "advkit/attacks_gradient.hpp"
#include "advkit/data.hpp"
#include "advkit/models.hpp"
#include "support/counting_model.hpp"

using namespace advkit;
using advkit::testing::CountingModel;

namespace {

AttackParams linf(double eps) {
  AttackParams p;
  p.norm = Norm::kLinf;
  p.eps = eps;
  return p;
}

// Malicious at (0.5, 0.5): z = 0.5 - 1 + 1 = 0.5.
const LogisticRegression kLr2(Vec{1, -2}, 1.0);
const Vec kX2{0.5, 0.5};

ConstraintSchema wide_box(std::size_t d) { return ConstraintSchema::box(d, -1e6, 1e6); }

}  // namespace

TEST_CASE("fgsm: zero budget returns x") {
  const auto schema = ConstraintSchema::box(2);
  const auto r = fgsm(kLr2, kX2, 1, linf(0.0), schema, Seed{1});
  CHECK(r.x_adv == kX2);
  CHECK_FALSE(r.success);
  const LogisticRegression benign(Vec{1, -2}, -1.0);
  CHECK(fgsm(benign, kX2, 1, linf(0.0), schema, Seed{1}).success);
}

TEST_CASE("fgsm: LR direction is -sign(w) scaled by eps") {
  const auto schema = ConstraintSchema::box(2);
  const auto r = fgsm(kLr2, kX2, 1, linf(0.05), schema, Seed{1});
  CHECK(r.x_adv[0] == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(r.x_adv[1] == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(r.linf == doctest::Approx(0.05));
  CHECK(r.iterations == 1);
}

TEST_CASE("fgsm: uncontrollable coordinate is untouched") {
  const ConstraintSchema schema({{"a", FeatureGroup::kIndependent},
                                 {"b", FeatureGroup::kUncontrollable}},
                                std::nullopt);
  const auto r = fgsm(kLr2, kX2, 1, linf(0.05), schema, Seed{1});
  CHECK(r.x_adv[1] == kX2[1]);
  CHECK(r.x_adv[0] == doctest::Approx(0.45));
}

TEST_CASE("fgsm: query-only models are rejected by run_attack") {
  Tree t;
  t.nodes.push_back(TreeNode{.value = 0.9});
  const DecisionTree dt(2, t);
  CHECK_THROWS_AS(run_attack(AttackSpec::with_defaults(AttackKind::kFgsm), dt, kX2, 1,
                             ConstraintSchema::box(2), Seed{1}),
                  Error);
}

TEST_CASE("pgd: one step equals the clamped normalized step") {
  const auto schema = ConstraintSchema::box(2);
  AttackParams p = linf(0.04);
  p.step = 0.05;
  p.iterations = 1;
  const auto r = pgd(kLr2, kX2, 1, p, schema, Seed{1});
  // g = (sigma - 1) w, so g / |g| = -w / sqrt(5).
  const double s = 0.05 / std::sqrt(5.0);
  CHECK(r.x_adv[0] == doctest::Approx(0.5 - s));
  CHECK(r.x_adv[1] == doctest::Approx(0.54));
  CHECK(r.iterations == 1);
}

TEST_CASE("pgd: every iterate stays in the eps ball") {
  const Dataset ds = synth({.n_per_class = 60, .d = 4, .separation = 0.3, .noise = 0.1}, Seed{3});
  HyperParams hp;
  hp.epochs = 40;
  const ModelPtr mlp = train(ModelKind::kMLP, hp, ds, Seed{4});
  const auto schema = ConstraintSchema::box(4);
  AttackParams p = linf(0.05);
  p.iterations = 20;
  for (const auto& s : ds.with_label(kMalicious).samples) {
    CountingModel cm(*mlp);
    const auto r = pgd(cm, s.features, 1, p, schema, Seed{5});
    for (const Vec& q : cm.inputs())
      CHECK(norm_linf(sub(q, s.features)) <= 0.05 + 1e-12);
    CHECK(r.queries == cm.calls());
  }
}

TEST_CASE("pgd: zero budget and zero gradient") {
  const auto schema = ConstraintSchema::box(2);
  CHECK(pgd(kLr2, kX2, 1, linf(0.0), schema, Seed{1}).x_adv == kX2);
  const LogisticRegression flat(Vec{0, 0}, 1.0);
  const auto r = pgd(flat, kX2, 1, linf(0.05), schema, Seed{1});
  CHECK(r.has_flag("zero_gradient"));
  CHECK(r.x_adv == kX2);
  CHECK_FALSE(r.success);
}

TEST_CASE("bim: stop rule and iteration count") {
  const auto schema = ConstraintSchema::box(2);
  const LogisticRegression benign(Vec{1, -2}, -1.0);
  AttackParams p = linf(0.05);
  p.iterations = 7;
  p.bim_variant = BimVariant::kA;
  const auto a = bim(benign, kX2, 1, p, schema, Seed{1});
  CHECK(a.iterations == 0);
  CHECK(a.x_adv == kX2);
  p.bim_variant = BimVariant::kB;
  CHECK(bim(benign, kX2, 1, p, schema, Seed{1}).iterations == 7);
  CHECK(bim(kLr2, kX2, 1, p, schema, Seed{1}).iterations == 7);
}

TEST_CASE("bim: alpha = eps and T = 1 reproduce fgsm") {
  Rng rng = make_rng(Seed{11});
  std::uniform_real_distribution<double> u(-3, 3), ux(0, 1);
  const auto schema = ConstraintSchema::box(5);
  for (int k = 0; k < 50; ++k) {
    Vec w(5), x(5);
    for (auto& v : w) v = u(rng);
    for (auto& v : x) v = ux(rng);
    const LogisticRegression lr(w, 0.1 - dot(w, x));
    AttackParams p = linf(0.07);
    p.step = 0.07;
    p.iterations = 1;
    const Vec ref = fgsm(lr, x, 1, p, schema, Seed{1}).x_adv;
    for (auto v : {BimVariant::kA, BimVariant::kB}) {
      p.bim_variant = v;
      CHECK(bim(lr, x, 1, p, schema, Seed{1}).x_adv == ref);
    }
  }
}

TEST_CASE("cw: already-benign input returns distance 0") {
  const LogisticRegression benign(Vec{1, -2}, -1.0);
  const auto r = cw(benign, kX2, 1, linf(0.05), ConstraintSchema::box(2), Seed{1});
  CHECK(r.success);
  CHECK(r.l2 == 0.0);
}

TEST_CASE("cw: box and budget invariants, success monotone in c") {
  const Dataset ds = synth({.n_per_class = 50, .d = 4, .separation = 0.25, .noise = 0.1}, Seed{8});
  HyperParams hp;
  hp.epochs = 60;
  const ModelPtr lr = train(ModelKind::kLR, hp, ds, Seed{9});
  const auto schema = ConstraintSchema::box(4);
  std::vector<int> wins;
  for (double c : {0.1, 1.0, 10.0}) {
    AttackParams p = linf(0.05);
    p.cw_c = c;
    p.iterations = 50;
    int n = 0;
    for (const auto& s : ds.with_label(kMalicious).samples) {
      const auto r = cw(*lr, s.features, 1, p, schema, Seed{1});
      for (double v : r.x_adv) CHECK((v >= 0.0 && v <= 1.0));
      CHECK(r.linf <= 0.05 + 1e-12);
      n += r.success;
    }
    wins.push_back(n);
  }
  CHECK(wins[0] <= wins[1]);
  CHECK(wins[1] <= wins[2]);
}

TEST_CASE("deepfool: affine closed form") {
  Rng rng = make_rng(Seed{21});
  std::normal_distribution<double> n01;
  const auto schema = wide_box(6);
  AttackParams p;
  p.norm = Norm::kL1;
  p.eps = 1e9;
  for (int k = 0; k < 50; ++k) {
    Vec w(6), x(6);
    for (auto& v : w) v = n01(rng);
    for (auto& v : x) v = n01(rng);
    double b = n01(rng);
    double f = dot(w, x) + b;
    if (f <= 0) {
      b += 1.0 - f;
      f = 1.0;
    }
    const LogisticRegression lr(w, b);
    const auto r = deepfool(lr, x, 1, p, schema, Seed{1});
    const double wn2 = dot(w, w);
    const Vec step = sub(r.x_adv, x);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(step[i] == doctest::Approx(-1.02 * f * w[i] / wn2).epsilon(1e-9));
    // Without overshoot the step lands exactly on the hyperplane.
    CHECK(r.l2 / 1.02 == doctest::Approx(std::abs(f) / std::sqrt(wn2)).epsilon(1e-9));
    CHECK(dot(w, r.x_adv) + b < 0);
    CHECK(r.success);
    CHECK(r.iterations == 1);
  }
}

TEST_CASE("deepfool: boundary point needs no step") {
  const LogisticRegression lr(Vec{1, 1}, -1.0);
  const Vec x{0.5, 0.5};
  AttackParams p;
  p.norm = Norm::kL1;
  p.eps = 1.0;
  const auto r = deepfool(lr, x, 1, p, ConstraintSchema::box(2), Seed{1});
  CHECK(r.x_adv == x);
  CHECK(r.success);
}

TEST_CASE("jsma: saliency branches") {
  // d f_t / dx_0 < 0 zeroes feature 0.
  std::vector<std::array<double, 2>> j{{-0.1, -0.3}, {0.2, -0.1}};
  auto s = saliency_map(j, 0);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == doctest::Approx(0.02));
  // Positive derivative of the other class zeroes the entry too.
  j = {{0.2, 0.1}, {0.1, -0.1}};
  s = saliency_map(j, 0);
  CHECK(s[0] == 0.0);
  // Feature 2 has the larger product term and is chosen first.
  j = {{0.1, -0.2}, {0.3, -0.4}};
  s = saliency_map(j, 0);
  CHECK(s[0] == doctest::Approx(0.02));
  CHECK(s[1] == doctest::Approx(0.12));
  CHECK(std::max_element(s.begin(), s.end()) - s.begin() == 1);
}

TEST_CASE("jsma: first move hits the most salient feature and respects the l1 budget") {
  const LogisticRegression lr(Vec{0.5, -3.0, 1.0}, 1.5);
  const Vec x{0.5, 0.5, 0.5};
  AttackParams p;
  p.norm = Norm::kL1;
  p.eps = 0.25;
  p.jsma_theta = 0.1;
  p.iterations = 1;
  auto r = jsma(lr, x, 1, p, ConstraintSchema::box(3), Seed{1});
  CHECK(r.x_adv[1] == doctest::Approx(0.6));
  CHECK(r.x_adv[0] == 0.5);
  p.iterations = 100;
  r = jsma(lr, x, 1, p, ConstraintSchema::box(3), Seed{1});
  CHECK(r.l1 <= 0.25 + 1e-12);
}

TEST_CASE("jsma: no positive saliency is flagged") {
  const LogisticRegression flat(Vec{0, 0}, 1.0);
  AttackParams p;
  p.norm = Norm::kL1;
  p.eps = 1.0;
  const auto r = jsma(flat, kX2, 1, p, ConstraintSchema::box(2), Seed{1});
  CHECK(r.has_flag("saliency exhausted"));
  CHECK_FALSE(r.success);
}

TEST_CASE("gradient attacks: exact query counts and determinism") {
  const Dataset ds = synth({.n_per_class = 30, .d = 3, .separation = 0.3, .noise = 0.1}, Seed{2});
  HyperParams hp;
  hp.epochs = 30;
  const auto schema = ConstraintSchema::box(3);
  for (ModelKind mk : {ModelKind::kLR, ModelKind::kMLP, ModelKind::kDeepEns}) {
    const ModelPtr m = train(mk, hp, ds, Seed{3});
    for (AttackKind ak : {AttackKind::kFgsm, AttackKind::kPgd, AttackKind::kBim, AttackKind::kCw,
                          AttackKind::kDeepFool, AttackKind::kJsma}) {
      const auto spec = AttackSpec::with_defaults(ak);
      for (std::size_t i = 0; i < 5; ++i) {
        const auto s = ds.with_label(kMalicious).samples[i];
        CountingModel cm(*m);
        const auto r = run_attack(spec, cm, s.features, 1, schema, Seed{i});
        CHECK(r.queries == cm.calls());
        const auto r2 = run_attack(spec, *m, s.features, 1, schema, Seed{i});
        CHECK(r2.x_adv == r.x_adv);
        if (r.success) CHECK(m->predict(r.x_adv) == kBenign);
      }
    }
  }
}

TEST_CASE("benign inputs are returned unchanged without queries") {
  CountingModel cm(kLr2);
  const auto r = run_attack(AttackSpec::with_defaults(AttackKind::kPgd), cm, kX2, 0,
                            ConstraintSchema::box(2), Seed{1});
  CHECK(r.x_adv == kX2);
  CHECK(r.queries == 0);
  CHECK(cm.calls() == 0);
}

TEST_CASE("attack params json round trip and validation") {
  AttackParams p = default_params(AttackKind::kJsma);
  p.cw_c = 3.5;
  p.bim_variant = BimVariant::kB;
  const auto q = AttackParams::from_json(p.to_json(), AttackParams{});
  CHECK(q.to_json() == p.to_json());
  CHECK_THROWS_AS(AttackParams::from_json({{"bogus", 1}}, p), Error);
  CHECK_THROWS_AS(AttackParams::from_json({{"eps", -1}}, p), Error);
  CHECK_THROWS_AS(AttackParams::from_json({{"beta1", 1.0}}, p), Error);
  CHECK_THROWS_AS(parse_attack_kind("nope"), Error);
  for (const auto& n : attack_names()) CHECK(to_string(parse_attack_kind(n)) == n);
}
