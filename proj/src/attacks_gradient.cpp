#include "advkit/attacks_gradient.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace advkit {

namespace {

constexpr double kZeroGradient = 1e-12;

Vec masked(ConstVecView g, const ConstraintSchema& schema) {
  Vec out(g.begin(), g.end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!schema.controllable(i)) out[i] = 0.0;
  return out;
}

double step_or(const AttackParams& p, double fallback) { return p.step > 0 ? p.step : fallback; }

Vec logit_margin_gradient(const LogitGradients& lg) { return sub(lg[1], lg[0]); }

}  // namespace

Vec steepest_direction(ConstVecView g, Norm norm, const ConstraintSchema& schema) {
  const Vec gm = masked(g, schema);
  Vec dir(gm.size(), 0.0);
  switch (norm) {
    case Norm::kLinf:
      for (std::size_t i = 0; i < gm.size(); ++i) dir[i] = sign(gm[i]);
      break;
    case Norm::kL2: {
      const double n = norm_l2(gm);
      if (n > 0)
        for (std::size_t i = 0; i < gm.size(); ++i) dir[i] = gm[i] / n;
      break;
    }
    case Norm::kL1: {
      std::size_t best = gm.size();
      double best_abs = 0.0;
      for (std::size_t i = 0; i < gm.size(); ++i)
        if (std::abs(gm[i]) > best_abs) {
          best_abs = std::abs(gm[i]);
          best = i;
        }
      if (best < gm.size()) dir[best] = sign(gm[best]);
      break;
    }
  }
  return dir;
}

Vec saliency_map(const std::vector<std::array<double, 2>>& jacobian, int target) {
  if (target != 0 && target != 1) throw Error("saliency_map: target must be 0 or 1");
  Vec s(jacobian.size(), 0.0);
  for (std::size_t i = 0; i < jacobian.size(); ++i) {
    const double dt = jacobian[i][target];
    const double other = jacobian[i][1 - target];
    if (dt < 0 || other > 0) continue;
    s[i] = dt * std::abs(other);
  }
  return s;
}

AttackResult fgsm(const Model& model, ConstVecView x, int y, const AttackParams& params,
                  const ConstraintSchema& schema, Seed) {
  QueryCounter oracle(model);
  const Vec g = oracle.loss_gradient(x, y);
  const Vec cand = axpy(x, params.eps, steepest_direction(g, params.norm, schema));
  return finish_attack(oracle, schema, x, cand, params, 1);
}

AttackResult pgd(const Model& model, ConstVecView x, int y, const AttackParams& params,
                 const ConstraintSchema& schema, Seed) {
  QueryCounter oracle(model);
  const double alpha = step_or(params, params.eps / 4.0);
  Vec xt(x.begin(), x.end());
  std::vector<std::string> flags;
  std::vector<double> trace;
  std::size_t it = 0;
  if (oracle.label(xt) != kBenign) {
    for (; it < params.iterations;) {
      const Vec g = masked(oracle.loss_gradient(xt, y), schema);
      const double gn = norm_l2(g);
      trace.push_back(gn);
      if (gn < kZeroGradient) {
        flags.push_back("zero_gradient");
        break;
      }
      xt = legalize(schema, x, axpy(xt, alpha / gn, g), params.norm, params.eps);
      ++it;
      if (oracle.label(xt) == kBenign) break;
    }
  }
  return finish_attack(oracle, schema, x, xt, params, it, std::move(trace), std::move(flags));
}

AttackResult bim(const Model& model, ConstVecView x, int y, const AttackParams& params,
                 const ConstraintSchema& schema, Seed) {
  QueryCounter oracle(model);
  const double alpha = step_or(params, params.eps / 5.0);
  Vec xt(x.begin(), x.end());
  std::size_t it = 0;
  for (; it < params.iterations; ++it) {
    if (params.bim_variant == BimVariant::kA && oracle.label(xt) == kBenign) break;
    const Vec g = oracle.loss_gradient(xt, y);
    xt = legalize(schema, x, axpy(xt, alpha, steepest_direction(g, params.norm, schema)),
                  params.norm, params.eps);
  }
  return finish_attack(oracle, schema, x, xt, params, it);
}

AttackResult cw(const Model& model, ConstVecView x, int y, const AttackParams& params,
                const ConstraintSchema& schema, Seed) {
  (void)y;
  QueryCounter oracle(model);
  const double alpha = step_or(params, 0.01);
  Vec xt(x.begin(), x.end());
  Vec best_success, best_loss_point = xt;
  double best_dist = std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  std::size_t it = 0;
  for (; it < params.iterations; ++it) {
    const Logits l = oracle.logits(xt);
    const Vec delta = sub(xt, x);
    const double dist = dot(delta, delta);
    const double margin = l[1] - l[0];
    const double loss = dist + params.cw_c * std::max(margin, -params.cw_kappa);
    trace.push_back(loss);
    if (margin <= 0 && dist < best_dist) {
      best_dist = dist;
      best_success = xt;
      if (dist == 0) break;
    }
    if (loss < best_loss) {
      best_loss = loss;
      best_loss_point = xt;
    }
    Vec grad = scaled(delta, 2.0);
    if (margin > -params.cw_kappa) {
      const Vec gm = logit_margin_gradient(oracle.logit_gradients(xt));
      grad = axpy(grad, params.cw_c, gm);
    }
    grad = masked(grad, schema);
    xt = legalize(schema, x, axpy(xt, -alpha, grad), params.norm, params.eps);
  }
  const Vec& out = best_success.empty() ? best_loss_point : best_success;
  return finish_attack(oracle, schema, x, out, params, it, std::move(trace));
}

AttackResult deepfool(const Model& model, ConstVecView x, int y, const AttackParams& params,
                      const ConstraintSchema& schema, Seed) {
  (void)y;
  QueryCounter oracle(model);
  Vec xt(x.begin(), x.end());
  Vec r_total(x.size(), 0.0);
  std::vector<std::string> flags;
  std::vector<double> trace;
  std::size_t it = 0;
  for (; it < params.iterations; ++it) {
    const Logits l = oracle.logits(xt);
    const double f = l[1] - l[0];
    trace.push_back(f);
    if (f <= 0) break;
    const Vec g = masked(logit_margin_gradient(oracle.logit_gradients(xt)), schema);
    const double gn2 = dot(g, g);
    if (gn2 < kZeroGradient * kZeroGradient) {
      flags.push_back("zero_gradient");
      break;
    }
    r_total = axpy(r_total, -f / gn2, g);
    xt = legalize(schema, x, axpy(x, 1.0 + params.overshoot, r_total), params.norm, params.eps);
  }
  return finish_attack(oracle, schema, x, xt, params, it, std::move(trace), std::move(flags));
}

AttackResult jsma(const Model& model, ConstVecView x, int y, const AttackParams& params,
                  const ConstraintSchema& schema, Seed) {
  (void)y;
  QueryCounter oracle(model);
  const std::size_t d = x.size();
  Vec xt(x.begin(), x.end());
  std::vector<std::string> flags;
  std::vector<double> trace;
  std::size_t it = 0;
  for (; it < params.iterations; ++it) {
    const Proba p = oracle.proba(xt);
    if (!(p[1] > p[0])) break;
    const double spent = budget_norm(schema, x, xt, params.norm);
    const double left = params.eps - spent;
    if (left <= 1e-12) {
      flags.push_back("budget_exhausted");
      break;
    }
    const Vec dm = logit_margin_gradient(oracle.logit_gradients(xt));
    std::vector<std::array<double, 2>> up(d), down(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double d1 = p[0] * p[1] * dm[i];
      up[i] = {-d1, d1};
      down[i] = {d1, -d1};
    }
    const Vec s_up = saliency_map(up, kBenign);
    const Vec s_down = saliency_map(down, kBenign);
    std::size_t best = d;
    double best_s = 0.0, dir = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      if (!schema.controllable(i)) continue;
      const auto& f = schema.feature(i);
      if (s_up[i] > best_s && xt[i] < f.hi) {
        best_s = s_up[i];
        best = i;
        dir = 1.0;
      }
      if (s_down[i] > best_s && xt[i] > f.lo) {
        best_s = s_down[i];
        best = i;
        dir = -1.0;
      }
    }
    trace.push_back(best_s);
    if (best == d) {
      flags.push_back("saliency exhausted");
      break;
    }
    const auto& f = schema.feature(best);
    const double room = dir > 0 ? f.hi - xt[best] : xt[best] - f.lo;
    double amount = std::min(params.jsma_theta, room);
    if (params.norm == Norm::kL1) amount = std::min(amount, left);
    Vec cand = xt;
    cand[best] += dir * amount;
    xt = legalize(schema, x, cand, params.norm, params.eps);
  }
  return finish_attack(oracle, schema, x, xt, params, it, std::move(trace), std::move(flags));
}

}  // namespace advkit
