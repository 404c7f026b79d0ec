#pragma once

// Gradient-free attacks. They only call predict_proba through a budgeted
// QueryCounter and therefore apply to every model kind.

#include <functional>
#include <span>

#include "advkit/attack.hpp"

namespace advkit {

AttackResult zoo(const Model& model, ConstVecView x, int y, const AttackParams& params,
                 const ConstraintSchema& schema, Seed seed);
AttackResult nes(const Model& model, ConstVecView x, int y, const AttackParams& params,
                 const ConstraintSchema& schema, Seed seed);
AttackResult zosgd(const Model& model, ConstVecView x, int y, const AttackParams& params,
                   const ConstraintSchema& schema, Seed seed);
AttackResult zoadamm(const Model& model, ConstVecView x, int y, const AttackParams& params,
                     const ConstraintSchema& schema, Seed seed);
AttackResult boundary_attack(const Model& model, ConstVecView x, int y, const AttackParams& params,
                             const ConstraintSchema& schema, Seed seed);
AttackResult hsja(const Model& model, ConstVecView x, int y, const AttackParams& params,
                  const ConstraintSchema& schema, Seed seed);

using Objective = std::function<double(ConstVecView)>;

// Hinge objective on log-probabilities for pushing class `source` toward
// `target`: max(log p_source - log p_target, -k). Non-positive once the
// target class wins.
double zo_hinge(const Proba& p, int source, double k);

// (f(x + h e_i) - f(x - h e_i)) / 2h
double symmetric_difference(const Objective& f, ConstVecView x, std::size_t i, double h);

// n Gaussian directions where the second half negates the first
// (directions[j] = -directions[n-1-j]). Zero outside `active` when given.
std::vector<Vec> antithetic_population(std::size_t n, std::size_t d, Rng& rng,
                                       const std::vector<bool>* active = nullptr);

// (1 / (sigma n)) sum_i delta_i f(x + sigma delta_i)
Vec nes_estimate(const Objective& f, ConstVecView x, double sigma, std::span<const Vec> directions);

// (1 / (sigma q)) sum_i u_i [f(x + sigma u_i) - f(x)]
Vec zosgd_estimate(const Objective& f, ConstVecView x, double sigma, std::span<const Vec> directions);

// Unit-sphere directions restricted to `active` coordinates.
std::vector<Vec> sphere_directions(std::size_t q, std::size_t d, Rng& rng,
                                   const std::vector<bool>* active = nullptr);

// Adaptive-momentum state with the max-corrected second moment.
struct AdaMomentState {
  AdaMomentState(std::size_t d, double beta1, double beta2, double eps)
      : m(d, 0.0), v(d, 0.0), v_hat(d, 0.0), beta1(beta1), beta2(beta2), eps(eps) {}
  // Consumes a gradient estimate and returns the step direction m / sqrt(v_hat + eps).
  Vec update(ConstVecView g);
  Vec m, v, v_hat;
  double beta1, beta2, eps;
};

// S_{x*}(x') for a model whose clean prediction is `original`: the margin of
// the best other class over the original class.
double hsja_discriminant(const Proba& p, int original);

// Bisection on the segment from a non-adversarial x to an adversarial x_adv.
// Returns an adversarial point whose blend factor is within tol of the
// boundary (tol is relative to the segment length).
Vec boundary_search(const std::function<bool(ConstVecView)>& is_adversarial, ConstVecView x,
                    ConstVecView x_adv, double tol);

}  // namespace advkit
