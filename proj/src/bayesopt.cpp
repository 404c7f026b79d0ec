#include "advkit/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace advkit {

bool on_simplex(ConstVecView w, double tol) {
  if (w.empty()) return false;
  double s = 0.0;
  for (double v : w) {
    if (!(v >= -tol)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= tol;
}

Vec dirichlet_sample(std::size_t n, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  Vec w(n);
  double s = 0.0;
  for (double& v : w) {
    v = e(rng);
    s += v;
  }
  for (double& v : w) v /= s;
  return w;
}

Vec uniform_weights(std::size_t n) { return Vec(n, 1.0 / static_cast<double>(n)); }

double RbfKernel::operator()(ConstVecView a, ConstVecView b) const {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return variance * std::exp(-0.5 * d2 / (lengthscale * lengthscale));
}

namespace {

// In-place lower Cholesky of a row-major n x n matrix; false if not PD.
bool cholesky(Vec& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
    for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
  }
  return true;
}

Vec forward_solve(const Vec& l, std::size_t n, ConstVecView b) {
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * y[k];
    y[i] = s / l[i * n + i];
  }
  return y;
}

Vec backward_solve(const Vec& l, std::size_t n, ConstVecView y) {
  Vec x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * x[k];
    x[ii] = s / l[ii * n + ii];
  }
  return x;
}

}  // namespace

GPState gp_fit(std::vector<Vec> X, Vec g, RbfKernel kernel, double lambda, bool standardize) {
  if (X.empty()) throw Error("gp_fit: no observations");
  if (X.size() != g.size()) throw Error("gp_fit: |X| != |g|");
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw Error("gp_fit: lambda must be finite and >= 0");
  if (!(kernel.lengthscale > 0) || !(kernel.variance > 0))
    throw Error("gp_fit: kernel lengthscale and variance must be > 0");
  const std::size_t dim = X.front().size();
  for (const Vec& x : X) {
    if (x.size() != dim) throw Error("gp_fit: inconsistent input dimension");
    for (double v : x)
      if (!std::isfinite(v)) throw Error("gp_fit: non-finite input");
  }
  for (double v : g)
    if (!std::isfinite(v)) throw Error("gp_fit: non-finite target");

  GPState gp;
  gp.kernel = kernel;
  gp.lambda = lambda;
  const std::size_t n = X.size();
  if (standardize) {
    double m = 0.0;
    for (double v : g) m += v;
    m /= static_cast<double>(n);
    double var = 0.0;
    for (double v : g) var += (v - m) * (v - m);
    const double sd = std::sqrt(var / static_cast<double>(n));
    gp.offset = m;
    gp.scale = sd > 0 ? sd : 1.0;
  }
  Vec gs(n);
  for (std::size_t i = 0; i < n; ++i) gs[i] = (g[i] - gp.offset) / gp.scale;

  Vec k(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) k[i * n + j] = kernel(X[i], X[j]);

  std::vector<double> ladder{lambda};
  for (double j = kJitterStart; j <= kJitterMax * (1 + 1e-9); j *= 10)
    if (j > lambda) ladder.push_back(j);
  bool ok = false;
  for (double jitter : ladder) {
    Vec a = k;
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += jitter;
    if (cholesky(a, n)) {
      gp.chol = std::move(a);
      gp.jitter = jitter;
      ok = true;
      break;
    }
  }
  if (!ok) throw Error("gp_fit: kernel matrix is singular even with jitter 1e-4");
  gp.alpha = backward_solve(gp.chol, n, forward_solve(gp.chol, n, gs));
  gp.X = std::move(X);
  gp.g = std::move(g);
  return gp;
}

Posterior gp_posterior(const GPState& gp, ConstVecView w) {
  const std::size_t n = gp.X.size();
  Vec ks(n);
  for (std::size_t i = 0; i < n; ++i) ks[i] = gp.kernel(gp.X[i], w);
  const Vec v = forward_solve(gp.chol, n, ks);
  const double mu = dot(ks, gp.alpha);
  const double var = std::max(0.0, gp.kernel(w, w) - dot(v, v));
  return {gp.offset + gp.scale * mu, gp.scale * gp.scale * var};
}

Acquisition parse_acquisition(const std::string& name) {
  if (name == "pi" || name == "PI") return Acquisition::kPI;
  if (name == "ucb" || name == "UCB") return Acquisition::kUCB;
  if (name == "gpucb" || name == "GPUCB" || name == "gp-ucb") return Acquisition::kGPUCB;
  throw Error("unknown acquisition '" + name + "' (valid: pi, ucb, gpucb)");
}

std::string to_string(Acquisition a) {
  switch (a) {
    case Acquisition::kPI: return "pi";
    case Acquisition::kUCB: return "ucb";
    case Acquisition::kGPUCB: return "gpucb";
  }
  return "?";
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double gp_ucb_beta(std::size_t domain_size, std::size_t t, double delta) {
  if (domain_size < 1 || t < 1) throw Error("gp_ucb_beta: |D| and t must be >= 1");
  if (!(delta > 0)) throw Error("gp_ucb_beta: delta must be > 0");
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double td = static_cast<double>(t);
  return 2.0 * std::log(static_cast<double>(domain_size) * td * td * pi2 / (6.0 * delta));
}

double acquisition(double mu, double sigma, Acquisition mode, const AcquisitionParams& params) {
  if (!(sigma >= 0)) throw Error("acquisition: sigma must be >= 0");
  switch (mode) {
    case Acquisition::kPI:
      if (sigma == 0) return mu > params.best ? 1.0 : 0.0;
      return normal_cdf((mu - params.best) / sigma);
    case Acquisition::kUCB:
      if (sigma == 0) return mu;
      return mu + params.kappa * sigma;
    case Acquisition::kGPUCB: {
      const double beta = gp_ucb_beta(params.domain_size, params.t, params.delta);
      if (sigma == 0) return mu;
      return mu + std::sqrt(std::max(beta, 0.0)) * sigma;
    }
  }
  return mu;
}

std::vector<Vec> candidate_set(std::size_t n, const Vec* best, std::size_t k, Rng& rng) {
  if (n == 0) throw Error("candidate_set: n must be >= 1");
  std::vector<Vec> c;
  c.reserve(n + 1 + k);
  for (std::size_t i = 0; i < n; ++i) {
    Vec v(n, 0.0);
    v[i] = 1.0;
    c.push_back(std::move(v));
  }
  if (best) {
    if (best->size() != n) throw Error("candidate_set: best has wrong dimension");
    c.push_back(*best);
  }
  for (std::size_t j = 0; j < k; ++j) c.push_back(dirichlet_sample(n, rng));
  return c;
}

Vec score_candidates(const GPState& gp, const std::vector<Vec>& candidates, Acquisition mode,
                     const AcquisitionParams& params, Exec exec) {
  Vec scores(candidates.size());
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
  auto score = [&](std::ptrdiff_t i) {
    const Posterior p = gp_posterior(gp, candidates[static_cast<std::size_t>(i)]);
    scores[static_cast<std::size_t>(i)] = acquisition(p.mean, std::sqrt(p.var), mode, params);
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) score(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) score(i);
  }
  return scores;
}

Proposal propose(const GPState& gp, Acquisition mode, AcquisitionParams params, std::size_t n,
                 const Vec* best, std::size_t k, Seed seed, Exec exec) {
  Rng rng = make_rng(seed);
  const std::vector<Vec> cands = candidate_set(n, best, k, rng);
  params.domain_size = cands.size();
  const Vec s = score_candidates(gp, cands, mode, params, exec);
  std::size_t arg = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] > s[arg]) arg = i;
  return {cands[arg], s[arg]};
}

void BayesOptTrace::write_csv(std::ostream& out) const {
  const std::size_t n = steps.empty() ? 0 : steps.front().w.size();
  out << "iteration";
  for (std::size_t i = 0; i < n; ++i) out << ",w" << i;
  out << ",objective,best_so_far,acquisition,mode\n";
  auto num = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (std::size_t it = 0; it < steps.size(); ++it) {
    const auto& s = steps[it];
    out << it;
    for (double v : s.w) out << ',' << num(v);
    out << ',' << num(s.value) << ',' << num(s.best_so_far) << ',' << num(s.acquisition) << ','
        << (std::isnan(s.acquisition) ? "init" : to_string(mode)) << '\n';
  }
}

BayesOptResult bayesopt_run(const SimplexObjective& objective, std::size_t n,
                            const BayesOptConfig& config, Seed seed) {
  if (n == 0) throw Error("bayesopt: n must be >= 1");
  for (const Vec& p : config.initial_points)
    if (p.size() != n || !on_simplex(p)) throw Error("bayesopt: initial point is not on the simplex");
  const std::size_t design = config.initial_points.size() + config.n_init;
  if (design == 0) throw Error("bayesopt: empty initial design");
  if (config.budget < design)
    throw Error("bayesopt: budget " + std::to_string(config.budget) +
                " is smaller than the initial design (" + std::to_string(design) + ")");

  BayesOptResult res;
  res.trace.mode = config.mode;
  res.best_value = -std::numeric_limits<double>::infinity();
  std::vector<Vec> X;
  Vec g;
  auto evaluate = [&](const Vec& w, double acq) {
    const double v = objective(w);
    if (!std::isfinite(v)) {
      std::string ws;
      for (double x : w) ws += (ws.empty() ? "" : ", ") + std::to_string(x);
      throw Error("bayesopt: objective returned a non-finite value at w = (" + ws + ")");
    }
    X.push_back(w);
    g.push_back(v);
    if (v > res.best_value) {
      res.best_value = v;
      res.best_w = w;
    }
    res.trace.steps.push_back({w, v, acq, res.best_value});
  };

  Rng rng = make_rng(derive(seed, 0));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const Vec& p : config.initial_points) evaluate(p, nan);
  for (std::size_t i = 0; i < config.n_init; ++i) evaluate(dirichlet_sample(n, rng), nan);

  for (std::size_t t = 1; X.size() < config.budget; ++t) {
    const GPState gp = gp_fit(X, g, config.kernel, config.lambda, config.standardize);
    AcquisitionParams ap;
    ap.kappa = config.kappa;
    ap.delta = config.delta;
    ap.t = t;
    ap.best = res.best_value;
    const Proposal p = propose(gp, config.mode, ap, n, &res.best_w, config.candidates,
                               derive(seed, t), config.exec);
    evaluate(p.w, p.acquisition);
  }
  return res;
}

}  // namespace advkit
