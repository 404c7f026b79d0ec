#include <algorithm>
#include <numeric>

#include "advkit/models.hpp"

namespace advkit {

namespace {

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0;
  double gain = 0;
};

// Scans candidate features for the best threshold. `stat` accumulates the
// per-row statistic and `score` rates a (left, right) partition relative to
// the parent; higher is better.
template <class Stat, class RowStat, class Score>
SplitChoice best_split(const std::vector<Sample>& samples, const std::vector<std::size_t>& rows,
                       const std::vector<std::size_t>& features, std::size_t min_leaf,
                       RowStat row_stat, Score score, double min_gain) {
  SplitChoice best;
  best.gain = min_gain;
  std::vector<std::size_t> sorted = rows;
  Stat total{};
  for (std::size_t r : rows) total += row_stat(r);
  for (std::size_t f : features) {
    std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
      const double va = samples[a].features[f], vb = samples[b].features[f];
      return va < vb || (va == vb && a < b);
    });
    Stat left{};
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
      left += row_stat(sorted[k]);
      const double v = samples[sorted[k]].features[f];
      const double next = samples[sorted[k + 1]].features[f];
      if (v == next) continue;
      if (k + 1 < min_leaf || sorted.size() - (k + 1) < min_leaf) continue;
      const double gain = score(left, total - left, total);
      if (gain > best.gain) {
        best = {true, f, v + 0.5 * (next - v), gain};
        if (!(best.threshold < next)) best.threshold = v;
      }
    }
  }
  return best;
}

std::vector<std::size_t> pick_features(std::size_t d, std::size_t max_features, Rng& rng) {
  std::vector<std::size_t> all(d);
  std::iota(all.begin(), all.end(), 0);
  if (max_features == 0 || max_features >= d) return all;
  for (std::size_t i = 0; i < max_features; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, d - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(max_features);
  std::sort(all.begin(), all.end());
  return all;
}

struct ClassStat {
  double w0 = 0, w1 = 0;
  ClassStat& operator+=(const ClassStat& o) {
    w0 += o.w0;
    w1 += o.w1;
    return *this;
  }
  friend ClassStat operator-(ClassStat a, const ClassStat& b) {
    a.w0 -= b.w0;
    a.w1 -= b.w1;
    return a;
  }
  double total() const { return w0 + w1; }
  // Weighted Gini impurity times node weight.
  double weighted_gini() const {
    const double t = total();
    if (t <= 0) return 0;
    return t * (1.0 - (w0 * w0 + w1 * w1) / (t * t));
  }
};

struct RegStat {
  double w = 0, s = 0;
  RegStat& operator+=(const RegStat& o) {
    w += o.w;
    s += o.s;
    return *this;
  }
  friend RegStat operator-(RegStat a, const RegStat& b) {
    a.w -= b.w;
    a.s -= b.s;
    return a;
  }
};

}  // namespace

Tree fit_classification_tree(const std::vector<Sample>& samples, const Vec& weights,
                             const std::vector<std::size_t>& rows, const TreeLearnerOptions& opt,
                             Rng& rng) {
  if (rows.empty()) throw Error("tree: no rows");
  const std::size_t d = samples.front().features.size();
  Tree tree;
  auto row_stat = [&](std::size_t r) {
    return samples[r].label == 1 ? ClassStat{0, weights[r]} : ClassStat{weights[r], 0};
  };
  auto build = [&](auto&& self, std::vector<std::size_t> node_rows, std::size_t depth) -> int {
    ClassStat stat;
    for (std::size_t r : node_rows) stat += row_stat(r);
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    // Laplace-smoothed leaf probability.
    tree.nodes[static_cast<std::size_t>(index)].value = (stat.w1 + 1.0) / (stat.total() + 2.0);
    const bool pure = stat.w0 <= 0 || stat.w1 <= 0;
    if (pure || depth >= opt.max_depth || node_rows.size() < 2 * opt.min_samples_leaf)
      return index;
    const auto features = pick_features(d, opt.max_features, rng);
    // Zero-gain splits are allowed on impure nodes (XOR-like structure).
    const SplitChoice split = best_split<ClassStat>(
        samples, node_rows, features, std::max<std::size_t>(1, opt.min_samples_leaf), row_stat,
        [](const ClassStat& l, const ClassStat& r, const ClassStat& t) {
          return t.weighted_gini() - l.weighted_gini() - r.weighted_gini();
        },
        -1e-12);
    if (!split.found) return index;
    std::vector<std::size_t> left, right;
    for (std::size_t r : node_rows)
      (samples[r].features[split.feature] <= split.threshold ? left : right).push_back(r);
    const int l = self(self, std::move(left), depth + 1);
    const int rr = self(self, std::move(right), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = rr;
    return index;
  };
  build(build, rows, 0);
  return tree;
}

Tree fit_regression_tree(const std::vector<Sample>& samples, const Vec& weights,
                         const Vec& numerators, const Vec& denominators,
                         const TreeLearnerOptions& opt) {
  const std::size_t d = samples.front().features.size();
  std::vector<std::size_t> features(d);
  std::iota(features.begin(), features.end(), 0);
  std::vector<std::size_t> rows(samples.size());
  std::iota(rows.begin(), rows.end(), 0);
  Tree tree;
  auto row_stat = [&](std::size_t r) { return RegStat{weights[r], weights[r] * numerators[r]}; };
  auto build = [&](auto&& self, std::vector<std::size_t> node_rows, std::size_t depth) -> int {
    double num = 0, den = 0;
    for (std::size_t r : node_rows) {
      num += weights[r] * numerators[r];
      den += weights[r] * denominators[r];
    }
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(index)].value = num / std::max(den, 1e-12);
    if (depth >= opt.max_depth || node_rows.size() < 2 * std::max<std::size_t>(1, opt.min_samples_leaf))
      return index;
    const SplitChoice split = best_split<RegStat>(
        samples, node_rows, features, std::max<std::size_t>(1, opt.min_samples_leaf), row_stat,
        [](const RegStat& l, const RegStat& r, const RegStat& t) {
          auto term = [](const RegStat& s) { return s.w > 0 ? s.s * s.s / s.w : 0.0; };
          return term(l) + term(r) - term(t);
        },
        1e-12);
    if (!split.found) return index;
    std::vector<std::size_t> left, right;
    for (std::size_t r : node_rows)
      (samples[r].features[split.feature] <= split.threshold ? left : right).push_back(r);
    const int l = self(self, std::move(left), depth + 1);
    const int rr = self(self, std::move(right), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = rr;
    return index;
  };
  build(build, rows, 0);
  return tree;
}

}  // namespace advkit
