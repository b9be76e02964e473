#include "mstarch/weights.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mstarch {

namespace {

constexpr long kMaxLocations = 10000;  // dense n x n storage throughout

double series_sd(const Eigen::VectorXd& s) {
  if (s.size() < 2) return 0.0;
  const double mean = s.mean();
  return std::sqrt((s.array() - mean).square().sum() / double(s.size() - 1));
}

}  // namespace

void WeightMatrix::check() const {
  if (values.rows() != values.cols())
    throw ValidationError("weight matrix must be square");
  if (values.rows() < 1) throw ValidationError("weight matrix is empty");
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    if (values(i, i) != 0.0)
      throw ValidationError("weight matrix diagonal must be zero at index " +
                            std::to_string(i));
  }
  if ((values.array() < 0.0).any())
    throw ValidationError("weight matrix entries must be non-negative");
  if (row_normalized) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      const double s = values.row(i).sum();
      if (s > 0.0 && std::abs(s - 1.0) > 1e-12)
        throw ValidationError("row " + std::to_string(i) +
                              " of a row-normalized weight matrix sums to " +
                              std::to_string(s));
    }
  }
}

void DistanceMatrix::check() const {
  if (values.rows() != values.cols())
    throw ValidationError("distance matrix must be square");
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    if (values(i, i) != 0.0)
      throw ValidationError("distance matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(values(i, j) - values(j, i)) > 1e-12)
        throw ValidationError("distance matrix must be symmetric");
      if (values(i, j) < 0.0)
        throw ValidationError("distances must be non-negative");
    }
  }
}

WeightMatrix build_queen_grid(long rows, long cols) {
  if (rows < 1 || cols < 1)
    throw ValidationError("queen grid needs rows >= 1 and cols >= 1");
  if (rows > kMaxLocations / cols)
    throw ValidationError("queen grid of " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " exceeds the supported size");
  const long n = rows * cols;
  WeightMatrix w;
  w.values = Eigen::MatrixXd::Zero(n, n);
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      const long i = r * cols + c;
      for (long dr = -1; dr <= 1; ++dr) {
        for (long dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const long rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
          w.values(i, rr * cols + cc) = 1.0;
        }
      }
    }
  }
  return w;
}

WeightMatrix row_normalize(const WeightMatrix& w,
                           std::vector<Eigen::Index>* zero_rows) {
  w.check();
  WeightMatrix out = w;
  for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
    const double s = out.values.row(i).sum();
    if (s > 0.0) {
      out.values.row(i) /= s;
    } else if (zero_rows != nullptr) {
      zero_rows->push_back(i);
    }
  }
  out.row_normalized = true;
  return out;
}

UnivariateLogArchFit fit_log_arch(const Eigen::VectorXd& series, int order,
                                  const ZeroPolicy& zero_policy,
                                  std::string series_id) {
  if (order < 1) throw ValidationError("log-ARCH order must be >= 1");
  const Eigen::Index len = series.size();
  if (len <= order + 10)
    throw ValidationError("series '" + series_id + "' too short for order " +
                          std::to_string(order) + ": need length > " +
                          std::to_string(order + 10) + ", got " +
                          std::to_string(len));
  if (!series.allFinite())
    throw ValidationError("series '" + series_id + "' has non-finite values");

  const double floor_y = zero_policy.floor_for(series_sd(series));
  long replaced = 0;
  Eigen::VectorXd ly(len);
  for (Eigen::Index t = 0; t < len; ++t) {
    double y = series[t];
    if (y == 0.0) {
      y = floor_y;
      ++replaced;
    }
    ly[t] = std::log(y * y);
  }

  const Eigen::Index rows = len - order;
  Eigen::MatrixXd design(rows, order + 1);
  Eigen::VectorXd target(rows);
  for (Eigen::Index t = 0; t < rows; ++t) {
    design(t, 0) = 1.0;
    for (int p = 1; p <= order; ++p) design(t, p) = ly[t + order - p];
    target[t] = ly[t + order];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < order + 1)
    throw ValidationError("degenerate input: design matrix for series '" +
                          series_id + "' is singular (constant series?)");
  const Eigen::VectorXd beta = qr.solve(target);

  UnivariateLogArchFit fit;
  fit.series_id = std::move(series_id);
  fit.order = order;
  fit.constant = beta[0];
  fit.coefficients = beta.tail(order);
  fit.zero_replacements = replaced;
  const Eigen::Index dof = rows - (order + 1);
  if (dof < 1)
    throw ValidationError("not enough observations for a residual variance");
  fit.residual_variance =
      (target - design * beta).squaredNorm() / double(dof);
  return fit;
}

double piccolo_distance(const UnivariateLogArchFit& a,
                        const UnivariateLogArchFit& b) {
  if (a.order != b.order)
    throw ValidationError("piccolo distance needs equal orders, got " +
                          std::to_string(a.order) + " and " +
                          std::to_string(b.order));
  return (a.coefficients - b.coefficients).norm();
}

DistanceMatrix piccolo_distance_matrix(
    const std::vector<UnivariateLogArchFit>& fits) {
  const Eigen::Index n = Eigen::Index(fits.size());
  if (n < 2) throw ValidationError("need at least two fitted series");
  DistanceMatrix d;
  d.values = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      d.values(i, j) = d.values(j, i) = piccolo_distance(fits[i], fits[j]);
  return d;
}

WeightMatrix knn_weights(const DistanceMatrix& d, int k) {
  d.check();
  const Eigen::Index n = d.n();
  if (k < 1 || k > n - 1)
    throw ValidationError("k must satisfy 1 <= k <= n-1; got k=" +
                          std::to_string(k) + " with n=" + std::to_string(n));
  WeightMatrix w;
  w.values = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Eigen::Index> order;
    order.reserve(n - 1);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    // ties break toward the lower series index (stable over index order)
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                       return d.values(i, a) < d.values(i, b);
                     });
    for (int m = 0; m < k; ++m) w.values(i, order[m]) = 1.0 / double(k);
  }
  w.row_normalized = true;
  return w;
}

std::pair<double, double> rho_validity_interval(const WeightMatrix& w) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(w.values, false);
  double lambda_min = 0.0, lambda_max = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const auto ev = es.eigenvalues()[i];
    if (std::abs(ev.imag()) > 1e-9) continue;
    lambda_min = std::min(lambda_min, ev.real());
    lambda_max = std::max(lambda_max, ev.real());
  }
  const double inf = std::numeric_limits<double>::infinity();
  return {lambda_min < 0.0 ? 1.0 / lambda_min : -inf,
          lambda_max > 0.0 ? 1.0 / lambda_max : inf};
}

}  // namespace mstarch
