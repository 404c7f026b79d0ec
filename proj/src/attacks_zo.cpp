#include "advkit/attacks_zo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace advkit {

namespace {

double step_or(const AttackParams& p, double fallback) { return p.step > 0 ? p.step : fallback; }

// Box/frozen/dependency rules only, no budget projection.
Vec remap_only(const ConstraintSchema& schema, ConstVecView x, ConstVecView cand) {
  return legalize(schema, x, cand, Norm::kL2, std::numeric_limits<double>::infinity());
}

// Budgeted view that keeps one query in reserve for the final label check.
class ReservedOracle {
 public:
  ReservedOracle(const Model& model, std::size_t budget) : counter_(model, budget) {}

  Proba proba(ConstVecView x) {
    if (counter_.remaining() <= 1) throw QueryBudgetExhausted{};
    return counter_.proba(x);
  }
  bool adversarial(ConstVecView x) {
    const Proba p = proba(x);
    return !(p[1] > p[0]);
  }
  QueryCounter& counter() { return counter_; }

 private:
  QueryCounter counter_;
};

struct HingeDescent {
  Vec x;
  double value;
};

// Shared loop of the score-based attacks: `step` maps (iterate, value) to the
// next raw candidate; the loop legalizes it, evaluates it and stops once the
// hinge reaches its floor.
template <typename StepFn>
AttackResult run_hinge_descent(const Model& model, ConstVecView x, const AttackParams& params,
                               const ConstraintSchema& schema, StepFn&& step) {
  if (params.query_budget < 1) throw Error("attack: query_budget must be >= 1");
  ReservedOracle oracle(model, params.query_budget);
  auto objective = [&](ConstVecView xp) {
    return zo_hinge(oracle.proba(xp), kMalicious, params.hinge_k);
  };
  HingeDescent cur{Vec(x.begin(), x.end()), 0.0};
  HingeDescent best = cur;
  std::vector<double> trace;
  std::vector<std::string> flags;
  std::size_t it = 0;
  try {
    cur.value = objective(cur.x);
    best = cur;
    trace.push_back(cur.value);
    while (it < params.iterations && cur.value > -params.hinge_k) {
      const Vec cand = step(objective, cur);
      cur.x = legalize(schema, x, cand, params.norm, params.eps);
      cur.value = objective(cur.x);
      ++it;
      trace.push_back(cur.value);
      if (cur.value < best.value) best = cur;
    }
  } catch (const QueryBudgetExhausted&) {
    flags.push_back("budget_exhausted");
  }
  return finish_attack(oracle.counter(), schema, x, best.x, params, it, std::move(trace),
                       std::move(flags));
}

std::vector<std::size_t> sample_coordinates(const std::vector<std::size_t>& pool, std::size_t k,
                                            Rng& rng) {
  std::vector<std::size_t> v = pool;
  k = std::min(k, v.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
    std::swap(v[i], v[pick(rng)]);
  }
  v.resize(k);
  return v;
}

}  // namespace

double zo_hinge(const Proba& p, int source, double k) {
  const double ls = std::log(std::max(p[source], kProbFloor));
  const double lt = std::log(std::max(p[1 - source], kProbFloor));
  return std::max(ls - lt, -k);
}

double symmetric_difference(const Objective& f, ConstVecView x, std::size_t i, double h) {
  Vec xp(x.begin(), x.end()), xm(x.begin(), x.end());
  xp[i] += h;
  xm[i] -= h;
  return (f(xp) - f(xm)) / (2.0 * h);
}

std::vector<Vec> antithetic_population(std::size_t n, std::size_t d, Rng& rng,
                                       const std::vector<bool>* active) {
  std::vector<Vec> dirs(n);
  for (std::size_t j = 0; j < (n + 1) / 2; ++j) {
    Vec u = gaussian_vector(d, rng);
    if (active)
      for (std::size_t i = 0; i < d; ++i)
        if (!(*active)[i]) u[i] = 0.0;
    dirs[n - 1 - j] = scaled(u, -1.0);
    dirs[j] = std::move(u);
  }
  return dirs;
}

Vec nes_estimate(const Objective& f, ConstVecView x, double sigma, std::span<const Vec> directions) {
  if (directions.empty()) throw Error("nes_estimate: empty population");
  Vec g(x.size(), 0.0);
  for (const Vec& u : directions) {
    const double v = f(axpy(x, sigma, u));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += v * u[i];
  }
  const double s = 1.0 / (sigma * static_cast<double>(directions.size()));
  for (double& gi : g) gi *= s;
  return g;
}

Vec zosgd_estimate(const Objective& f, ConstVecView x, double sigma,
                   std::span<const Vec> directions) {
  if (directions.empty()) throw Error("zosgd_estimate: empty population");
  const double f0 = f(x);
  Vec g(x.size(), 0.0);
  for (const Vec& u : directions) {
    const double v = f(axpy(x, sigma, u)) - f0;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += v * u[i];
  }
  const double s = 1.0 / (sigma * static_cast<double>(directions.size()));
  for (double& gi : g) gi *= s;
  return g;
}

std::vector<Vec> sphere_directions(std::size_t q, std::size_t d, Rng& rng,
                                   const std::vector<bool>* active) {
  std::size_t k = d;
  if (active) k = static_cast<std::size_t>(std::count(active->begin(), active->end(), true));
  if (k == 0) throw Error("sphere_directions: no active coordinates");
  std::vector<Vec> dirs;
  dirs.reserve(q);
  for (std::size_t j = 0; j < q; ++j) {
    const Vec u = unit_sphere_vector(k, rng);
    Vec full(d, 0.0);
    for (std::size_t i = 0, c = 0; i < d; ++i)
      if (!active || (*active)[i]) full[i] = u[c++];
    dirs.push_back(std::move(full));
  }
  return dirs;
}

Vec AdaMomentState::update(ConstVecView g) {
  if (g.size() != m.size()) throw Error("AdaMomentState: dimension mismatch");
  Vec step(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    m[i] = beta1 * m[i] + (1 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
    v_hat[i] = std::max(v_hat[i], v[i]);
    step[i] = m[i] / std::sqrt(v_hat[i] + eps);
  }
  return step;
}

double hsja_discriminant(const Proba& p, int original) {
  const double margin = p[1 - original] - p[original];
  // Ties resolve to benign, which counts as leaving the malicious class.
  if (margin == 0 && original == kMalicious) return std::numeric_limits<double>::min();
  return margin;
}

Vec boundary_search(const std::function<bool(ConstVecView)>& is_adversarial, ConstVecView x,
                    ConstVecView x_adv, double tol) {
  double lo = 0.0, hi = 1.0;
  Vec best(x_adv.begin(), x_adv.end());
  auto blend = [&](double a) {
    Vec out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1 - a) * x[i] + a * x_adv[i];
    return out;
  };
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    Vec xm = blend(mid);
    if (is_adversarial(xm)) {
      hi = mid;
      best = std::move(xm);
    } else {
      lo = mid;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Score-based attacks

AttackResult zoo(const Model& model, ConstVecView x, int, const AttackParams& params,
                 const ConstraintSchema& schema, Seed seed) {
  Rng rng = make_rng(seed);
  const auto pool = schema.controllable_indices();
  const double eta = step_or(params, 0.01);
  return run_hinge_descent(model, x, params, schema, [&](auto& f, const HingeDescent& cur) {
    Vec next = cur.x;
    for (std::size_t i : sample_coordinates(pool, params.coords_per_iter, rng))
      next[i] -= eta * symmetric_difference(f, cur.x, i, params.h);
    return next;
  });
}

AttackResult nes(const Model& model, ConstVecView x, int, const AttackParams& params,
                 const ConstraintSchema& schema, Seed seed) {
  Rng rng = make_rng(seed);
  const double alpha = step_or(params, params.eps / 10.0);
  const auto& active = schema.controllable_mask();
  return run_hinge_descent(model, x, params, schema, [&](auto& f, const HingeDescent& cur) {
    const auto dirs = antithetic_population(params.population, x.size(), rng, &active);
    const Vec g = nes_estimate(f, cur.x, params.sigma, dirs);
    Vec next = cur.x;
    for (std::size_t i = 0; i < next.size(); ++i) next[i] -= alpha * sign(g[i]);
    return next;
  });
}

AttackResult zosgd(const Model& model, ConstVecView x, int, const AttackParams& params,
                   const ConstraintSchema& schema, Seed seed) {
  Rng rng = make_rng(seed);
  const double eta = step_or(params, 0.01);
  const auto& active = schema.controllable_mask();
  return run_hinge_descent(model, x, params, schema, [&](auto& f, const HingeDescent& cur) {
    const auto dirs = sphere_directions(params.population, x.size(), rng, &active);
    return axpy(cur.x, -eta, zosgd_estimate(f, cur.x, params.sigma, dirs));
  });
}

AttackResult zoadamm(const Model& model, ConstVecView x, int, const AttackParams& params,
                     const ConstraintSchema& schema, Seed seed) {
  Rng rng = make_rng(seed);
  const double alpha = step_or(params, params.eps / 5.0);
  const auto& active = schema.controllable_mask();
  AdaMomentState state(x.size(), params.beta1, params.beta2, params.adam_eps);
  return run_hinge_descent(model, x, params, schema, [&](auto& f, const HingeDescent& cur) {
    const auto dirs = sphere_directions(params.population, x.size(), rng, &active);
    return axpy(cur.x, -alpha, state.update(zosgd_estimate(f, cur.x, params.sigma, dirs)));
  });
}

// ---------------------------------------------------------------------------
// Decision-based attacks

namespace {

// Adversarial starting point: the configured start if it is adversarial,
// else uniform draws over the controllable box.
std::optional<Vec> find_start(ReservedOracle& oracle, ConstVecView x, const AttackParams& params,
                              const ConstraintSchema& schema, Rng& rng) {
  if (params.start) {
    if (params.start->size() != x.size()) throw Error("attack: start has wrong dimension");
    Vec s = remap_only(schema, x, *params.start);
    if (oracle.adversarial(s)) return s;
  }
  const auto pool = schema.controllable_indices();
  if (pool.empty()) return std::nullopt;
  for (std::size_t k = 0; k < params.init_budget; ++k) {
    Vec cand(x.begin(), x.end());
    for (std::size_t i : pool) {
      std::uniform_real_distribution<double> u(schema.feature(i).lo, schema.feature(i).hi);
      cand[i] = u(rng);
    }
    cand = remap_only(schema, x, cand);
    if (oracle.adversarial(cand)) return cand;
  }
  return std::nullopt;
}

AttackResult unchanged(QueryCounter& counter, ConstVecView x, const ConstraintSchema& schema,
                       const AttackParams& params, std::vector<std::string> flags) {
  return finish_attack(counter, schema, x, x, params, 0, {}, std::move(flags));
}

}  // namespace

AttackResult boundary_attack(const Model& model, ConstVecView x, int, const AttackParams& params,
                             const ConstraintSchema& schema, Seed seed) {
  if (params.query_budget < 1) throw Error("attack: query_budget must be >= 1");
  Rng rng = make_rng(seed);
  ReservedOracle oracle(model, params.query_budget);
  std::vector<double> trace;
  std::vector<std::string> flags;
  const auto& active = schema.controllable_mask();
  const std::size_t d = x.size();
  Vec cur(x.begin(), x.end());
  std::size_t it = 0;
  try {
    if (oracle.adversarial(x)) return unchanged(oracle.counter(), x, schema, params, {});
    auto start = find_start(oracle, x, params, schema, rng);
    if (!start) {
      flags.push_back("no_adversarial_init");
      return unchanged(oracle.counter(), x, schema, params, std::move(flags));
    }
    auto is_adv = [&](ConstVecView p) { return oracle.adversarial(remap_only(schema, x, p)); };
    cur = remap_only(schema, x, boundary_search(is_adv, x, *start, 1e-3));
    double dist = norm_l2(sub(cur, x));
    trace.push_back(dist);
    double orth = params.orth_step, src = params.src_step;
    std::size_t orth_trials = 0, orth_ok = 0, src_trials = 0, src_ok = 0;
    for (; it < params.iterations && dist > 0; ++it) {
      // Spherical step: random direction orthogonal to (x - cur), scaled to
      // orth * dist, then projected back onto the sphere of radius dist.
      const Vec to_src = sub(x, cur);
      Vec eta = gaussian_vector(d, rng);
      for (std::size_t i = 0; i < d; ++i)
        if (!active[i]) eta[i] = 0.0;
      const double proj = dot(eta, to_src) / (dist * dist);
      eta = axpy(eta, -proj, to_src);
      const double en = norm_l2(eta);
      if (en == 0) continue;
      Vec sph = axpy(cur, orth * dist / en, eta);
      const Vec off = sub(sph, x);
      sph = axpy(x, dist / norm_l2(off), off);
      sph = remap_only(schema, x, sph);
      ++orth_trials;
      if (oracle.adversarial(sph)) {
        ++orth_ok;
        Vec cand = remap_only(schema, x, axpy(sph, src, sub(x, sph)));
        ++src_trials;
        if (oracle.adversarial(cand)) {
          const double nd = norm_l2(sub(cand, x));
          if (nd <= dist) {
            ++src_ok;
            cur = std::move(cand);
            dist = nd;
            trace.push_back(dist);
          }
        }
      }
      if (orth_trials == 10) {
        orth *= (orth_ok > 5) ? 1.5 : 1 / 1.5;
        orth_trials = orth_ok = 0;
      }
      if (src_trials == 10) {
        src *= (src_ok > 2) ? 1.5 : 1 / 1.5;
        src_trials = src_ok = 0;
      }
      orth = std::min(orth, 1.0);
      src = std::min(src, 1.0);
    }
  } catch (const QueryBudgetExhausted&) {
    flags.push_back("budget_exhausted");
  }
  return finish_attack(oracle.counter(), schema, x, cur, params, it, std::move(trace),
                       std::move(flags));
}

AttackResult hsja(const Model& model, ConstVecView x, int, const AttackParams& params,
                  const ConstraintSchema& schema, Seed seed) {
  if (params.query_budget < 1) throw Error("attack: query_budget must be >= 1");
  Rng rng = make_rng(seed);
  ReservedOracle oracle(model, params.query_budget);
  std::vector<double> trace;
  std::vector<std::string> flags;
  const auto& active = schema.controllable_mask();
  const std::size_t d = x.size();
  Vec best(x.begin(), x.end());
  std::size_t it = 0;
  try {
    if (oracle.adversarial(x)) return unchanged(oracle.counter(), x, schema, params, {});
    auto start = find_start(oracle, x, params, schema, rng);
    if (!start) {
      flags.push_back("no_adversarial_init");
      return unchanged(oracle.counter(), x, schema, params, std::move(flags));
    }
    auto is_adv = [&](ConstVecView p) {
      return hsja_discriminant(oracle.proba(remap_only(schema, x, p)), kMalicious) > 0;
    };
    auto to_boundary = [&](ConstVecView adv) {
      return remap_only(schema, x, boundary_search(is_adv, x, adv, params.binary_tolerance));
    };
    Vec cur = to_boundary(*start);
    best = cur;
    double best_dist = norm_l2(sub(cur, x));
    trace.push_back(best_dist);
    for (; it < params.iterations; ++it) {
      const double t = static_cast<double>(it + 1);
      const double dist = norm_l2(sub(cur, x));
      if (dist == 0) break;
      const std::size_t b = std::max<std::size_t>(
          1, std::min(params.hsja_max_directions,
                      static_cast<std::size_t>(100.0 * std::sqrt(t))));
      const double xi = dist / static_cast<double>(d);
      const auto dirs = sphere_directions(b, d, rng, &active);
      std::vector<double> phi(b);
      for (std::size_t k = 0; k < b; ++k) phi[k] = is_adv(axpy(cur, xi, dirs[k])) ? 1.0 : -1.0;
      const double mean = std::accumulate(phi.begin(), phi.end(), 0.0) / static_cast<double>(b);
      const bool uniform = std::abs(mean) == 1.0;
      Vec g(d, 0.0);
      for (std::size_t k = 0; k < b; ++k)
        g = axpy(g, uniform ? phi[k] : phi[k] - mean, dirs[k]);
      const double gn = norm_l2(g);
      if (gn == 0) continue;
      g = scaled(g, 1.0 / gn);
      double step = dist / std::sqrt(t);
      Vec next;
      for (int halving = 0; halving < 30; ++halving) {
        const Vec cand = axpy(cur, step, g);
        if (is_adv(cand)) {
          next = remap_only(schema, x, cand);
          break;
        }
        step /= 2;
      }
      if (next.empty()) continue;
      cur = to_boundary(next);
      const double nd = norm_l2(sub(cur, x));
      trace.push_back(nd);
      if (nd < best_dist) {
        best_dist = nd;
        best = cur;
      }
    }
  } catch (const QueryBudgetExhausted&) {
    flags.push_back("budget_exhausted");
  }
  return finish_attack(oracle.counter(), schema, x, best, params, it, std::move(trace),
                       std::move(flags));
}

}  // namespace advkit
