#include "doctest.h"

#include "advkit/constraints.hpp"

using namespace advkit;

namespace {

// total, count, mean = total / count, port (uncontrollable), iat (packet-derived)
ConstraintSchema flow_schema() {
  std::vector<std::string> names = {"total", "count", "mean", "port", "iat"};
  std::vector<FeatureSpec> fs(5);
  for (std::size_t i = 0; i < 5; ++i) fs[i].name = names[i];
  fs[0].hi = 100;
  fs[1].hi = 100;
  fs[2].group = FeatureGroup::kDependent;
  fs[2].hi = 100;
  fs[2].formula = DependencyFormula::parse("/ total count", names);
  fs[3].group = FeatureGroup::kUncontrollable;
  fs[4].group = FeatureGroup::kPacketDerived;
  return ConstraintSchema(fs);
}

}  // namespace

TEST_CASE("remap is the identity for in-box all-independent vectors") {
  const auto s = ConstraintSchema::box(3);
  const Vec x{0.1, 0.2, 0.3}, adv{0.4, 0.0, 1.0};
  CHECK(s.remap(x, adv) == adv);
}

TEST_CASE("dependent mean is recomputed from total and count") {
  const auto s = flow_schema();
  const Vec x{8, 2, 4, 0.5, 0.5};
  const Vec adv{10, 4, 99, 0.9, 0.1};
  const Vec out = s.remap(x, adv);
  CHECK(out[2] == doctest::Approx(2.5));
  CHECK(out[3] == 0.5);
  CHECK(out[4] == 0.5);
}

TEST_CASE("division by a near-zero denominator yields zero") {
  const auto s = flow_schema();
  const Vec x{8, 2, 4, 0.5, 0.5};
  const Vec out = s.remap(x, Vec{10, 0, 0, 0.5, 0.5});
  CHECK(out[2] == 0.0);
}

TEST_CASE("mask restores every index outside it") {
  std::vector<FeatureSpec> fs(5);
  for (std::size_t i = 0; i < 5; ++i) fs[i].name = "b" + std::to_string(i);
  const ConstraintSchema s(fs, std::vector<std::size_t>{3, 4});
  const Vec x{0.1, 0.2, 0.3, 0.4, 0.5};
  const Vec out = s.remap(x, Vec{0.9, 0.9, 0.9, 0.9, 0.9});
  CHECK(out[0] == x[0]);
  CHECK(out[1] == x[1]);
  CHECK(out[2] == x[2]);
  CHECK(out[3] == 0.9);
  CHECK(out[4] == 0.9);
  CHECK(s.controllable_indices() == std::vector<std::size_t>{3, 4});
}

TEST_CASE("schema validation") {
  const std::vector<std::string> names = {"a", "b"};
  SUBCASE("dependent referencing dependent is rejected") {
    std::vector<FeatureSpec> fs(2);
    fs[0].name = "a";
    fs[1].name = "b";
    fs[0].group = fs[1].group = FeatureGroup::kDependent;
    fs[0].formula = DependencyFormula::parse("+ b 1", names);
    fs[1].formula = DependencyFormula::parse("+ a 1", names);
    CHECK_THROWS_AS(ConstraintSchema(fs, std::nullopt), Error);
  }
  SUBCASE("self reference is rejected") {
    std::vector<FeatureSpec> fs(2);
    fs[0].name = "a";
    fs[1].name = "b";
    fs[0].group = FeatureGroup::kDependent;
    fs[0].formula = DependencyFormula::parse("* a 2", names);
    CHECK_THROWS_AS(ConstraintSchema(fs, std::nullopt), Error);
  }
  SUBCASE("lo > hi is rejected") {
    std::vector<FeatureSpec> fs(1);
    fs[0].name = "a";
    fs[0].lo = 1;
    fs[0].hi = 0;
    CHECK_THROWS_AS(ConstraintSchema(fs, std::nullopt), Error);
  }
  SUBCASE("bad formulas") {
    CHECK_THROWS_AS(DependencyFormula::parse("/ a", names), Error);
    CHECK_THROWS_AS(DependencyFormula::parse("+ a c", names), Error);
    CHECK_THROWS_AS(DependencyFormula::parse("a b", names), Error);
  }
  SUBCASE("dimension mismatch") {
    const auto s = ConstraintSchema::box(3);
    CHECK_THROWS_AS(s.remap(Vec{0, 0}, Vec{0, 0, 0}), Error);
  }
}

TEST_CASE("formula evaluation with nested operators and constants") {
  const std::vector<std::string> names = {"a", "b"};
  const auto f = DependencyFormula::parse("* 2 - a / b 4", names);
  CHECK(f.evaluate(Vec{3, 8}) == doctest::Approx(2 * (3 - 2)));
  CHECK(DependencyFormula::parse(f.to_prefix(names), names).evaluate(Vec{3, 8}) ==
        doctest::Approx(2.0));
}

TEST_CASE("project_lp examples") {
  CHECK(project_lp(Vec{0.2, -0.3}, Norm::kLinf, 0.1) == Vec{0.1, -0.1});
  const Vec p2 = project_lp(Vec{3, 4}, Norm::kL2, 1.0);
  CHECK(p2[0] == doctest::Approx(0.6));
  CHECK(p2[1] == doctest::Approx(0.8));
  const Vec inside{0.01, -0.02, 0.03};
  for (Norm n : {Norm::kLinf, Norm::kL2, Norm::kL1}) CHECK(project_lp(inside, n, 1.0) == inside);
  // l1: (3, 1) onto the unit l1 ball -> (1, 0); (2, 2) -> (0.5, 0.5).
  const Vec p1 = project_lp(Vec{3, -1}, Norm::kL1, 1.0);
  CHECK(p1[0] == doctest::Approx(1.0));
  CHECK(p1[1] == doctest::Approx(0.0));
  const Vec p1b = project_lp(Vec{2, -2}, Norm::kL1, 1.0);
  CHECK(p1b[0] == doctest::Approx(0.5));
  CHECK(p1b[1] == doctest::Approx(-0.5));
  CHECK_THROWS_AS(project_lp(Vec{1}, Norm::kL2, -1.0), Error);
}

TEST_CASE("l1 projection matches brute-force nearest point on random inputs") {
  // Oracle: minimize ||u - v||_2 over the l1 ball by projected subgradient is
  // slow; for 2-D we enumerate the ball boundary densely instead.
  Rng rng(7);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec v{U(rng), U(rng)};
    const double eps = 0.5;
    const Vec p = project_lp(v, Norm::kL1, eps);
    double best = norm_l2(sub(v, p));
    if (norm_l1(v) <= eps) {
      CHECK(best == 0.0);
      continue;
    }
    double brute = 1e9;
    for (int k = 0; k <= 40000; ++k) {
      const double t = -1.0 + 2.0 * k / 40000.0;
      for (double sgn : {-1.0, 1.0}) {
        const Vec c{eps * t, sgn * eps * (1 - std::abs(t))};
        brute = std::min(brute, norm_l2(sub(v, c)));
      }
    }
    CHECK(best <= brute + 1e-6);
  }
}

TEST_CASE("property: remap idempotence, frozen coordinates, projection bounds") {
  const auto s = flow_schema();
  Rng rng(11);
  std::uniform_real_distribution<double> U(-50, 150);
  std::uniform_real_distribution<double> E(0, 3);
  for (int trial = 0; trial < 500; ++trial) {
    Vec x{std::abs(U(rng)) / 2, std::abs(U(rng)) / 2, 0, 0.3, 0.7};
    x[2] = x[0] / std::max(x[1], 1.0);
    const Vec adv{U(rng), U(rng), U(rng), U(rng), U(rng)};
    const Vec once = s.remap(x, adv);
    CHECK(s.remap(x, once) == once);
    CHECK(once[3] == x[3]);
    CHECK(once[4] == x[4]);
    for (Norm n : {Norm::kLinf, Norm::kL2, Norm::kL1}) {
      const double eps = E(rng);
      const Vec d{U(rng), U(rng), U(rng)};
      const Vec p = project_lp(d, n, eps);
      CHECK(norm(p, n) <= eps + 1e-12);
      CHECK(project_lp(p, n, eps) == p);
      const Vec leg = legalize(s, x, adv, n, eps);
      CHECK(budget_norm(s, x, leg, n) <= eps + 1e-12);
      CHECK(s.remap(x, leg) == leg);
    }
  }
}

TEST_CASE("schema json round trip") {
  std::vector<std::string> names = {"a", "b", "c"};
  std::vector<FeatureSpec> fs(3);
  for (std::size_t i = 0; i < 3; ++i) fs[i].name = names[i];
  fs[2].group = FeatureGroup::kDependent;
  fs[2].formula = DependencyFormula::parse("+ a * 0.5 b", names);
  fs[1].group = FeatureGroup::kPacketDerived;
  const ConstraintSchema s(fs, std::vector<std::size_t>{0, 2});
  const auto back = schema_from_json(schema_to_json(s));
  CHECK(back.dim() == 3);
  CHECK(back.feature(1).group == FeatureGroup::kPacketDerived);
  CHECK(back.mask() == s.mask());
  const Vec x{0.2, 0.4, 0.4};
  CHECK(back.remap(x, Vec{0.6, 0.1, 0.0}) == s.remap(x, Vec{0.6, 0.1, 0.0}));
  CHECK_THROWS_AS(schema_from_json("{\"version\": 2, \"features\": []}"), Error);
}
