#pragma once

#include <Eigen/Dense>
#include <functional>

namespace mstarch::optim {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Result {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

// Nelder-Mead simplex minimization. Stops when the simplex function
// spread falls below tol * (|f_best| + 1) or after max_iter iterations.
Result nelder_mead(const Objective& f, const Eigen::VectorXd& x0, double tol,
                   int max_iter, double initial_step = 0.25);

// BFGS with central-difference gradients and Armijo backtracking.
Result bfgs(const Objective& f, const Eigen::VectorXd& x0, double tol,
            int max_iter);

Eigen::VectorXd gradient_central(const Objective& f, const Eigen::VectorXd& x,
                                 double h_scale = 1e-6);

// Central-difference Hessian with per-coordinate steps.
Eigen::MatrixXd hessian_central(const Objective& f, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& steps);

// Square roots of the diagonal of H^{-1}. Returns {values, true} when H
// is positive definite; {NaN vector, false} otherwise.
std::pair<Eigen::VectorXd, bool> std_errors_from_hessian(
    const Eigen::MatrixXd& hessian);

}  // namespace mstarch::optim
