#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "advkit/core.hpp"

namespace advkit {

enum class FeatureGroup { kIndependent, kDependent, kUncontrollable, kPacketDerived };

FeatureGroup parse_feature_group(const std::string& name);
std::string to_string(FeatureGroup group);

// Arithmetic expression over feature references and constants. Parsed from
// whitespace-separated prefix notation, e.g. "/ fwd_total fwd_count" or
// "* 2 + a b".
class DependencyFormula {
 public:
  enum class Op { kConst, kFeature, kAdd, kSub, kMul, kDiv };

  static DependencyFormula parse(const std::string& text,
                                 const std::vector<std::string>& feature_names);

  double evaluate(ConstVecView x) const;
  // Feature indices referenced anywhere in the expression.
  std::vector<std::size_t> references() const;
  std::string to_prefix(const std::vector<std::string>& feature_names) const;

  static DependencyFormula constant(double v);
  static DependencyFormula feature(std::size_t index);
  static DependencyFormula binary(Op op, DependencyFormula lhs, DependencyFormula rhs);

 private:
  struct Node {
    Op op = Op::kConst;
    double value = 0;
    std::size_t index = 0;
    std::shared_ptr<const Node> lhs, rhs;
  };
  explicit DependencyFormula(std::shared_ptr<const Node> root) : root_(std::move(root)) {}
  static double eval_node(const Node& n, ConstVecView x);
  std::shared_ptr<const Node> root_;
};

// Division by |v| below this threshold evaluates to 0.
inline constexpr double kSafeDivisionThreshold = 1e-9;

struct FeatureSpec {
  std::string name;
  FeatureGroup group = FeatureGroup::kIndependent;
  double lo = 0.0;
  double hi = 1.0;
  std::optional<DependencyFormula> formula;  // required iff group == kDependent
};

class ConstraintSchema {
 public:
  // Validates bounds, formulas, and the mask; throws Error on violation.
  ConstraintSchema(std::vector<FeatureSpec> features,
                   std::optional<std::vector<std::size_t>> mask = std::nullopt);

  // d Independent features named f0..f{d-1} on [lo, hi].
  static ConstraintSchema box(std::size_t d, double lo = 0.0, double hi = 1.0);

  std::size_t dim() const { return features_.size(); }
  const FeatureSpec& feature(std::size_t i) const { return features_[i]; }
  const std::vector<FeatureSpec>& features() const { return features_; }
  const std::optional<std::vector<std::size_t>>& mask() const { return mask_; }
  std::vector<std::string> feature_names() const;

  // True when an attack may move coordinate i directly.
  bool controllable(std::size_t i) const { return controllable_[i]; }
  const std::vector<bool>& controllable_mask() const { return controllable_; }
  std::vector<std::size_t> controllable_indices() const;

  // The remapping function: restores frozen coordinates to x_orig, clips
  // Independent coordinates to their box, then recomputes Dependent ones.
  Vec remap(ConstVecView x_orig, ConstVecView x_adv) const;

 private:
  std::vector<FeatureSpec> features_;
  std::optional<std::vector<std::size_t>> mask_;
  std::vector<bool> in_mask_;
  std::vector<bool> controllable_;
  std::vector<std::size_t> dependent_order_;
};

// Euclidean-nearest point of the eps-ball in the given norm (nearest in that
// norm's own geometry for l_inf/l2; l1 uses the sort-based simplex projection
// of absolute values).
Vec project_lp(ConstVecView delta, Norm norm, double eps);

// Zeroes non-controllable coordinates of (candidate - x_orig), projects onto
// the eps-ball and remaps. The emitted vector satisfies the budget on every
// non-Dependent coordinate.
Vec legalize(const ConstraintSchema& schema, ConstVecView x_orig, ConstVecView candidate,
             Norm norm, double eps);

// Norm of the difference restricted to non-Dependent coordinates.
double budget_norm(const ConstraintSchema& schema, ConstVecView x_orig, ConstVecView x_adv,
                   Norm norm);

ConstraintSchema load_schema(const std::string& path);
void save_schema(const ConstraintSchema& schema, const std::string& path);
std::string schema_to_json(const ConstraintSchema& schema);
ConstraintSchema schema_from_json(const std::string& text);

}  // namespace advkit
