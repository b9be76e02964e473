#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "mstarch/filter.hpp"
#include "mstarch/model.hpp"

namespace mstarch {

// Unconstrained parameter vector. Two-regime layout (length 11):
//   rho1, gamma1, delta1, phi1, rho2, gamma2, delta2, phi2, p, q, sigma2
// with rho/gamma/delta mapped to (-1,1) and p, q to (0,1) by the bounded
// logistic map, sigma2 by exp, phi unconstrained. One-regime layout
// (length 5): rho, gamma, delta, phi, sigma2.
using ParamVector = Eigen::VectorXd;

double logistic_map(double u, double a, double b);
double logistic_unmap(double x, double a, double b);

ModelParams to_constrained(const ParamVector& v);
ParamVector to_unconstrained(const ModelParams& m);

struct OneRegimeParams {
  RegimeParams regime;
  double sigma2 = constants::log_chi2_var;
};
OneRegimeParams one_regime_to_constrained(const ParamVector& v);
ParamVector one_regime_to_unconstrained(const OneRegimeParams& m);

struct FitOptions {
  int n_starts = 5;
  std::uint64_t seed = 1234;  // start-point jitter stream
  double tol = 1e-8;          // relative objective-change tolerance
  int max_iterations = 2000;  // per optimizer stage
  bool compute_std_errors = true;
};

struct EstimationResult {
  ModelParams params;  // one-regime fits store tied regimes with p = q = 0.5
  int n_regimes = 2;
  Eigen::VectorXd std_errors;  // constrained scale, ParamVector order
  Eigen::VectorXd p_values;    // two-sided normal
  bool se_reliable = false;
  double loglik = 0.0;
  double bic = 0.0;
  int n_params = 0;
  long n_obs = 0;  // n * (T - 1)
  bool converged = false;
  int iterations = 0;
  int start_points_tried = 0;

  ParamVector constrained_vector() const;  // length 11 or 5
};

// Maximizes the Hamilton-filter quasi-likelihood over the unconstrained
// space from multiple start points (Nelder-Mead, then BFGS polish).
// rho + delta < 1 per regime is enforced by a smooth penalty; labels are
// canonicalized so gamma1 <= gamma2 (p and q swap along).
EstimationResult fit_two_regime(const LogSquaredPanel& panel,
                                const WeightMatrix& w,
                                const FitOptions& options = {});

EstimationResult fit_one_regime(const LogSquaredPanel& panel,
                                const WeightMatrix& w,
                                const FitOptions& options = {});

// Standard errors from the inverse numerical Hessian of -loglik at the
// optimum, central differences on the constrained scale. Fills
// std_errors / p_values / se_reliable on `result` and returns the errors.
Eigen::VectorXd std_errors(EstimationResult& result,
                           const LogSquaredPanel& panel,
                           const WeightMatrix& w);

double bic(double loglik, int n_params, double n_obs);

}  // namespace mstarch
