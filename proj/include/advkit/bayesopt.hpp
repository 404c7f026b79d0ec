#pragma once

// Gaussian-process Bayesian optimization over weight simplices.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "advkit/core.hpp"

namespace advkit {

// Nonnegative entries summing to 1 within this tolerance.
inline constexpr double kSimplexTolerance = 1e-9;
bool on_simplex(ConstVecView w, double tol = kSimplexTolerance);
// Uniform point of the simplex (Dirichlet(1, ..., 1)).
Vec dirichlet_sample(std::size_t n, Rng& rng);
Vec uniform_weights(std::size_t n);

struct RbfKernel {
  double lengthscale = 0.2;
  double variance = 1.0;
  double operator()(ConstVecView a, ConstVecView b) const;
};

struct GPState {
  std::vector<Vec> X;
  Vec g;
  RbfKernel kernel;
  // Requested and effective (after escalation) diagonal jitter.
  double lambda = 0.0;
  double jitter = 0.0;
  // Affine map from standardized to original values.
  double offset = 0.0;
  double scale = 1.0;
  // Row-major lower Cholesky factor of K + jitter I and (K + jitter I)^-1 g_std.
  Vec chol;
  Vec alpha;
};

inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-4;

// Exact GP regression. With standardize the targets are z-scored before the
// fit and the posterior is reported in original units.
GPState gp_fit(std::vector<Vec> X, Vec g, RbfKernel kernel, double lambda,
               bool standardize = false);

struct Posterior {
  double mean = 0.0;
  double var = 0.0;
};
Posterior gp_posterior(const GPState& gp, ConstVecView w);

enum class Acquisition { kPI, kUCB, kGPUCB };
Acquisition parse_acquisition(const std::string& name);
std::string to_string(Acquisition a);

struct AcquisitionParams {
  double kappa = 2.0;
  double delta = 0.1;
  std::size_t domain_size = 1;
  std::size_t t = 1;
  // Incumbent f+ for PI.
  double best = 0.0;
};

double normal_cdf(double z);
// 2 log(|D| t^2 pi^2 / (6 delta)). Any delta > 0 is accepted.
double gp_ucb_beta(std::size_t domain_size, std::size_t t, double delta);
double acquisition(double mu, double sigma, Acquisition mode, const AcquisitionParams& params);

// Vertices, then `best` when given, then k Dirichlet samples.
std::vector<Vec> candidate_set(std::size_t n, const Vec* best, std::size_t k, Rng& rng);

// Acquisition value of every candidate.
Vec score_candidates(const GPState& gp, const std::vector<Vec>& candidates, Acquisition mode,
                     const AcquisitionParams& params, Exec exec = Exec::kParallel);

struct Proposal {
  Vec w;
  double acquisition = 0.0;
};
// Argmax of the acquisition over candidate_set; ties go to the lowest index.
// params.domain_size is overwritten with the candidate count.
Proposal propose(const GPState& gp, Acquisition mode, AcquisitionParams params, std::size_t n,
                 const Vec* best, std::size_t k, Seed seed, Exec exec = Exec::kParallel);

struct BayesOptConfig {
  std::size_t budget = 30;
  std::size_t n_init = 5;
  std::vector<Vec> initial_points;
  Acquisition mode = Acquisition::kGPUCB;
  double kappa = 2.0;
  double delta = 0.1;
  RbfKernel kernel;
  double lambda = 1e-6;
  std::size_t candidates = 1024;
  bool standardize = true;
  Exec exec = Exec::kParallel;
};

struct BayesOptStep {
  Vec w;
  double value = 0.0;
  // NaN for initial-design points.
  double acquisition = 0.0;
  double best_so_far = 0.0;
};

struct BayesOptTrace {
  std::vector<BayesOptStep> steps;
  Acquisition mode = Acquisition::kGPUCB;
  // iteration, w_0..w_{n-1}, objective, best_so_far, acquisition, mode
  void write_csv(std::ostream& out) const;
};

struct BayesOptResult {
  Vec best_w;
  double best_value = 0.0;
  BayesOptTrace trace;
};

using SimplexObjective = std::function<double(const Vec&)>;

// Fit on the full history, propose, evaluate, repeat until the budget is
// spent. The initial design is the configured points followed by n_init
// Dirichlet draws; a budget smaller than the design is an error.
BayesOptResult bayesopt_run(const SimplexObjective& objective, std::size_t n,
                            const BayesOptConfig& config, Seed seed);

}  // namespace advkit
