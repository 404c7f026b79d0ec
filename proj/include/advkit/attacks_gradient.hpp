#pragma once

// White-box attacks. All require a differentiable model and emit vectors
// that pass through legalize() (budget projection + remapping).

#include "advkit/attack.hpp"

namespace advkit {

AttackResult fgsm(const Model& model, ConstVecView x, int y, const AttackParams& params,
                  const ConstraintSchema& schema, Seed seed);
AttackResult pgd(const Model& model, ConstVecView x, int y, const AttackParams& params,
                 const ConstraintSchema& schema, Seed seed);
AttackResult bim(const Model& model, ConstVecView x, int y, const AttackParams& params,
                 const ConstraintSchema& schema, Seed seed);
AttackResult cw(const Model& model, ConstVecView x, int y, const AttackParams& params,
                const ConstraintSchema& schema, Seed seed);
AttackResult deepfool(const Model& model, ConstVecView x, int y, const AttackParams& params,
                      const ConstraintSchema& schema, Seed seed);
AttackResult jsma(const Model& model, ConstVecView x, int y, const AttackParams& params,
                  const ConstraintSchema& schema, Seed seed);

// Steepest-ascent direction of unit size in the given norm for gradient g,
// restricted to controllable coordinates: sign(g) for l_inf, g/||g||_2 for
// l2, the largest-|g| coordinate for l1.
Vec steepest_direction(ConstVecView g, Norm norm, const ConstraintSchema& schema);

// jacobian[i][c] = d f_c / d x_i. Saliency for target t: zero when
// d f_t/dx_i < 0 or sum_{j != t} d f_j/dx_i > 0, otherwise their product
// with the absolute value of the second term.
Vec saliency_map(const std::vector<std::array<double, 2>>& jacobian, int target);

}  // namespace advkit
