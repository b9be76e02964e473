#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mstarch/common.hpp"

namespace mstarch {

// Dense spatial weight matrix W_n. Zero diagonal, non-negative entries.
struct WeightMatrix {
  Eigen::MatrixXd values;
  bool row_normalized = false;

  Eigen::Index n() const { return values.rows(); }
  // Throws ValidationError if any structural invariant is violated.
  void check() const;
};

struct DistanceMatrix {
  Eigen::MatrixXd values;

  Eigen::Index n() const { return values.rows(); }
  void check() const;  // symmetry, zero diagonal, non-negativity
};

// OLS fit of log y_t^2 on an intercept and its first `order` lags.
struct UnivariateLogArchFit {
  std::string series_id;
  int order = 1;
  double constant = 0.0;         // transformed intercept (centering absorbed)
  Eigen::VectorXd coefficients;  // length `order`
  double residual_variance = 0.0;
  long zero_replacements = 0;
};

// Binary queen-contiguity adjacency on a rows x cols lattice.
WeightMatrix build_queen_grid(long rows, long cols);

// Divides each row with positive sum by that sum. Zero rows are left
// untouched; their indices are reported through `zero_rows` when given.
WeightMatrix row_normalize(const WeightMatrix& w,
                           std::vector<Eigen::Index>* zero_rows = nullptr);

UnivariateLogArchFit fit_log_arch(const Eigen::VectorXd& series, int order,
                                  const ZeroPolicy& zero_policy = {},
                                  std::string series_id = {});

// Euclidean distance between ARCH coefficient vectors; constants excluded.
double piccolo_distance(const UnivariateLogArchFit& a,
                        const UnivariateLogArchFit& b);

DistanceMatrix piccolo_distance_matrix(
    const std::vector<UnivariateLogArchFit>& fits);

// w_ij = 1/k for the k nearest neighbours of i, 0 otherwise. Ties are
// broken toward the lower series index. Row-normalized by construction.
WeightMatrix knn_weights(const DistanceMatrix& d, int k);

// Interval of rho for which I - rho*W is guaranteed non-singular,
// (1/lambda_min, 1/lambda_max) over the real eigenvalues of W. Exposed as
// a validity check; estimation itself uses (-1, 1) on row-normalized W.
std::pair<double, double> rho_validity_interval(const WeightMatrix& w);

}  // namespace mstarch
