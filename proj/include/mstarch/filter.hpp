#pragma once

#include <Eigen/Dense>
#include <array>

#include "mstarch/model.hpp"

namespace mstarch {

// Hamilton filter output. Row t of `filtered` is xi_{t|t}; row t of
// `predicted` is xi_{t+1|t} (row t predicts t+1); `log_densities` holds
// log eta_t per regime. Period 1 conditions the recursion: its filtered
// row is the initial distribution, its log-density row is zero, and it
// contributes no likelihood term.
struct FilterOutput {
  Eigen::MatrixXd filtered;       // T x 2
  Eigen::MatrixXd predicted;      // T x 2
  Eigen::MatrixXd log_densities;  // T x 2
  double loglik = 0.0;
};

struct SmoothedPath {
  Eigen::MatrixXd smoothed;  // T x 2, xi_{t|T}
  RegimePath most_likely;    // per-time argmax
};

// log f(Y*_t | s_t, Y*_{t-1}) = log|I - rho W| - (n/2) log(2 pi sigma2)
//                               - U'U / (2 sigma2),
// U = (I - rho W) yt - gamma ytm1 - delta W ytm1 - phi 1.
double log_cond_density(const Eigen::VectorXd& yt, const Eigen::VectorXd& ytm1,
                        const RegimeParams& regime, double sigma2,
                        const WeightMatrix& w);

// log|det(I - rho W)| via dense LU with sign tracking. Throws
// NumericalError naming rho when the determinant is non-positive or the
// factorization is numerically singular.
double log_det_i_minus_rho_w(const Eigen::MatrixXd& w, double rho);

FilterOutput hamilton_filter(const LogSquaredPanel& panel,
                             const ModelParams& params, const WeightMatrix& w,
                             const std::array<double, 2>& init);

// Kim backward recursion xi_{t|T} = xi_{t|t} (.) {P' [xi_{t+1|T} (/) xi_{t+1|t}]},
// seeded with xi_{T|T}. A zero predicted probability paired with positive
// smoothed mass is an impossible transition configuration and throws.
SmoothedPath kim_smooth(const FilterOutput& filter_out,
                        const TransitionMatrix& transition);

// Filter log-likelihood with the chain's stationary distribution as init.
double loglik(const ModelParams& params, const LogSquaredPanel& panel,
              const WeightMatrix& w);

// Shared evaluation state for repeated likelihood evaluations on one
// panel: W Y* is formed once, then each evaluation is O(n T) plus two LU
// factorizations for the log-determinants.
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(const LogSquaredPanel& panel, const WeightMatrix& w);

  double loglik(const ModelParams& params,
                const std::array<double, 2>& init) const;
  FilterOutput filter(const ModelParams& params,
                      const std::array<double, 2>& init) const;
  // Gaussian quasi-likelihood of the one-regime model; identical to the
  // filter with both regimes tied.
  double one_regime_loglik(const RegimeParams& regime, double sigma2) const;

  Eigen::Index n() const { return y_.rows(); }
  Eigen::Index T() const { return y_.cols(); }
  double y_mean() const { return y_.mean(); }

 private:
  Eigen::MatrixXd y_;   // n x T
  Eigen::MatrixXd wy_;  // W * y
  Eigen::MatrixXd w_;   // weight matrix values

  template <typename OnStep>
  double run_filter(const ModelParams& params, const std::array<double, 2>& init,
                    OnStep&& on_step) const;
};

}  // namespace mstarch
