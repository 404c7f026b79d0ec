#include <set>
#include <sstream>

#include "doctest.h"

#include "advkit/data.hpp"
#include "advkit/model.hpp"

using namespace advkit;

namespace {

double accuracy(const Model& m, const Dataset& ds) {
  std::size_t ok = 0;
  for (const auto& s : ds.samples) ok += m.predict(s.features) == s.label;
  return double(ok) / double(ds.size());
}

Dataset numbered(std::size_t n) {
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) ds.samples.push_back({Vec{double(i)}, int(i % 2)});
  return ds;
}

}  // namespace

TEST_CASE("load_csv reads rows in file order") {
  const auto schema = ConstraintSchema::box(2);
  std::istringstream in("f0,f1,label\n0.1,0.2,0\n0.3,0.4,1\n0.5,0.6,1\n");
  const Dataset ds = read_csv(in, schema);
  REQUIRE(ds.size() == 3);
  CHECK(ds.samples[0].features == Vec{0.1, 0.2});
  CHECK(ds.samples[2].features == Vec{0.5, 0.6});
  CHECK(ds.samples[1].label == 1);
}

TEST_CASE("load_csv accepts columns in any order") {
  const auto schema = ConstraintSchema::box(2);
  std::istringstream in("label,f1,f0\n1,0.2,0.1\n");
  const Dataset ds = read_csv(in, schema);
  CHECK(ds.samples[0].features == Vec{0.1, 0.2});
}

TEST_CASE("load_csv errors") {
  const auto schema = ConstraintSchema::box(2);
  auto fails_with = [&](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      read_csv(in, schema);
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK_MESSAGE(msg.find(needle) != std::string::npos, msg);
      return;
    }
    FAIL("expected an error for: " << text);
  };
  fails_with("f0,f1,label\n0.1,0.2,0\n0.1,0.2,2\n", "row 2");
  fails_with("f0,f1,label\n", "no samples");
  fails_with("f0,label\n0.1,0\n", "missing column 'f1'");
  fails_with("f0,f1,f2,label\n0,0,0,0\n", "extra column 'f2'");
  fails_with("f0,f1\n0,0\n", "missing 'label'");
  fails_with("f0,f1,label\n0.1,abc,0\n", "row 1: non-numeric");
}

TEST_CASE("csv round trip is exact") {
  const auto schema = ConstraintSchema::box(3);
  const Dataset ds = synth({.n_per_class = 20, .d = 3}, Seed{5});
  std::stringstream buf;
  write_csv(buf, ds, schema.feature_names());
  const Dataset back = read_csv(buf, schema);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.samples[i].features == ds.samples[i].features);
    CHECK(back.samples[i].label == ds.samples[i].label);
  }
}

TEST_CASE("split sizes follow 3:1:1 with remainder to train") {
  auto sizes = [](std::size_t n) {
    const Split s = split(numbered(n), {3, 1, 1}, Seed{1});
    return std::array<std::size_t, 3>{s.train.size(), s.val.size(), s.test.size()};
  };
  CHECK(sizes(10) == std::array<std::size_t, 3>{6, 2, 2});
  CHECK(sizes(11) == std::array<std::size_t, 3>{7, 2, 2});
  CHECK_THROWS_AS(split(numbered(4), {3, 1, 1}, Seed{1}), Error);
}

TEST_CASE("property: split is a disjoint exhaustive deterministic partition") {
  for (std::size_t n = 5; n < 60; n += 7) {
    const Dataset ds = numbered(n);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Split a = split(ds, {3, 1, 1}, Seed{seed});
      const Split b = split(ds, {3, 1, 1}, Seed{seed});
      std::multiset<double> seen;
      for (const Dataset* part : {&a.train, &a.val, &a.test})
        for (const auto& s : part->samples) seen.insert(s.features[0]);
      CHECK(seen.size() == n);
      CHECK(std::set<double>(seen.begin(), seen.end()).size() == n);
      for (std::size_t i = 0; i < a.train.size(); ++i)
        CHECK(a.train.samples[i].features == b.train.samples[i].features);
    }
  }
}

TEST_CASE("synth is deterministic and validated") {
  const SynthSpec spec{.n_per_class = 30, .d = 4};
  const Dataset a = synth(spec, Seed{3}), b = synth(spec, Seed{3});
  REQUIRE(a.size() == 60);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i].features == b.samples[i].features);
  for (const auto& s : a.samples)
    for (double v : s.features) CHECK((v >= 0.0 && v <= 1.0));
  CHECK_THROWS_AS(synth({.n_per_class = 0, .d = 2}, Seed{1}), Error);
  CHECK_THROWS_AS(synth({.n_per_class = 5, .d = 1}, Seed{1}), Error);
}

TEST_CASE("synth separation controls learnability") {
  HyperParams hp;
  hp.epochs = 50;
  SUBCASE("6 sigma separation in 2-D is learnable") {
    const Dataset ds = synth({.n_per_class = 500, .d = 2, .separation = 0.3, .noise = 0.05}, Seed{9});
    const Split s = split(ds, {3, 1, 1}, Seed{9});
    const auto m = train(ModelKind::kLR, hp, s.train, Seed{9});
    CHECK(accuracy(*m, s.test) >= 0.95);
  }
  SUBCASE("zero separation is chance level") {
    const Dataset ds = synth({.n_per_class = 1000, .d = 2, .separation = 0.0, .noise = 0.1}, Seed{9});
    const Split s = split(ds, {3, 1, 1}, Seed{9});
    const auto m = train(ModelKind::kLR, hp, s.train, Seed{9});
    const double acc = accuracy(*m, s.test);
    CHECK(acc >= 0.4);
    CHECK(acc <= 0.6);
  }
}

TEST_CASE("min-max scaler maps the fitted range to [0,1]") {
  Dataset ds;
  ds.samples = {{Vec{2, 10}, 0}, {Vec{4, 10}, 1}, {Vec{3, 10}, 0}};
  const auto sc = MinMaxScaler::fit(ds);
  CHECK(sc.transform(Vec{3, 10}) == Vec{0.5, 0.0});
  CHECK(sc.transform(Vec{9, 10}) == Vec{1.0, 0.0});
}
