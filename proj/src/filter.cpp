#include "mstarch/filter.hpp"

#include <Eigen/LU>
#include <cmath>
#include <sstream>

namespace mstarch {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void check_init(const std::array<double, 2>& init) {
  if (!(init[0] >= 0.0) || !(init[1] >= 0.0) ||
      std::abs(init[0] + init[1] - 1.0) > 1e-8)
    throw ValidationError("initial distribution must be non-negative and "
                          "sum to 1");
}

}  // namespace

double log_det_i_minus_rho_w(const Eigen::MatrixXd& w, double rho) {
  const Eigen::Index n = w.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * w;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  double log_det = 0.0;
  double sign = double(lu.permutationP().determinant());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = lu.matrixLU()(i, i);
    if (!(std::abs(d) > 1e-300))
      throw NumericalError("(I - rho*W) is numerically singular for rho=" +
                           fmt(rho));
    sign *= (d > 0.0) ? 1.0 : -1.0;
    log_det += std::log(std::abs(d));
  }
  if (sign <= 0.0)
    throw NumericalError("det(I - rho*W) is non-positive for rho=" + fmt(rho));
  return log_det;
}

double log_cond_density(const Eigen::VectorXd& yt, const Eigen::VectorXd& ytm1,
                        const RegimeParams& regime, double sigma2,
                        const WeightMatrix& w) {
  if (!w.row_normalized)
    throw ValidationError("log_cond_density requires a row-normalized "
                          "weight matrix");
  const Eigen::Index n = w.n();
  if (yt.size() != n || ytm1.size() != n)
    throw ValidationError("observation vectors do not match the weight "
                          "matrix dimension");
  if (!yt.allFinite() || !ytm1.allFinite())
    throw ValidationError("non-finite observation vector");
  if (!(sigma2 > 0.0)) throw ValidationError("sigma2 must be positive");
  regime.check_bounds();

  const double log_det = log_det_i_minus_rho_w(w.values, regime.rho);
  const Eigen::VectorXd u = yt - regime.rho * (w.values * yt) -
                            regime.gamma * ytm1 -
                            regime.delta * (w.values * ytm1) -
                            Eigen::VectorXd::Constant(n, regime.phi);
  return log_det - 0.5 * double(n) * (kLog2Pi + std::log(sigma2)) -
         u.squaredNorm() / (2.0 * sigma2);
}

LikelihoodEvaluator::LikelihoodEvaluator(const LogSquaredPanel& panel,
                                         const WeightMatrix& w) {
  w.check();
  if (!w.row_normalized)
    throw ValidationError("filter requires a row-normalized weight matrix");
  if (panel.n() != w.n())
    throw ValidationError("panel has " + std::to_string(panel.n()) +
                          " locations but weight matrix is " +
                          std::to_string(w.n()) + "x" + std::to_string(w.n()));
  if (panel.T() < 2) throw ValidationError("panel needs at least 2 periods");
  if (!panel.values.allFinite())
    throw ValidationError("log-squared panel has non-finite values");
  y_ = panel.values;
  w_ = w.values;
  wy_ = w_ * y_;
}

// Shared forward recursion. on_step(t, log_eta, log_filtered,
// log_predicted_next) is called for t = 1..T-1 after the likelihood
// contribution of period t has been accumulated.
template <typename OnStep>
double LikelihoodEvaluator::run_filter(const ModelParams& params,
                                       const std::array<double, 2>& init,
                                       OnStep&& on_step) const {
  const Eigen::Index n = y_.rows();
  const Eigen::Index T = y_.cols();
  const double sigma2 = params.sigma2;
  const double norm_const =
      -0.5 * double(n) * (kLog2Pi + std::log(sigma2));

  std::array<double, 2> log_det{};
  for (int s = 0; s < 2; ++s)
    log_det[s] = log_det_i_minus_rho_w(w_, params.regimes[s].rho);

  const double lp_stay1 = std::log(params.transition.p);
  const double lp_leave1 = std::log1p(-params.transition.p);
  const double lq_stay2 = std::log(params.transition.q);
  const double lq_leave2 = std::log1p(-params.transition.q);

  // log xi_{t|t-1}; initialized with P * init for t = 1.
  std::array<double, 2> lp{};
  {
    const double p = params.transition.p, q = params.transition.q;
    lp[0] = std::log(p * init[0] + (1.0 - q) * init[1]);
    lp[1] = std::log((1.0 - p) * init[0] + q * init[1]);
  }

  double ll = 0.0;
  Eigen::VectorXd u(n);
  std::array<double, 2> log_eta{}, lf{};
  for (Eigen::Index t = 1; t < T; ++t) {
    for (int s = 0; s < 2; ++s) {
      const RegimeParams& r = params.regimes[s];
      u = y_.col(t) - r.rho * wy_.col(t) - r.gamma * y_.col(t - 1) -
          r.delta * wy_.col(t - 1) - Eigen::VectorXd::Constant(n, r.phi);
      log_eta[s] = log_det[s] + norm_const - u.squaredNorm() / (2.0 * sigma2);
    }
    const double j0 = lp[0] + log_eta[0];
    const double j1 = lp[1] + log_eta[1];
    const double step_ll = log_sum_exp(j0, j1);
    if (!std::isfinite(step_ll))
      throw NumericalError(
          "both regime densities vanished at time index " + std::to_string(t) +
          " (degenerate parameters or data)");
    lf[0] = j0 - step_ll;
    lf[1] = j1 - step_ll;
    ll += step_ll;
    lp[0] = log_sum_exp(lp_stay1 + lf[0], lq_leave2 + lf[1]);
    lp[1] = log_sum_exp(lp_leave1 + lf[0], lq_stay2 + lf[1]);
    on_step(t, log_eta, lf, lp);
  }
  return ll;
}

double LikelihoodEvaluator::loglik(const ModelParams& params,
                                   const std::array<double, 2>& init) const {
  params.check_bounds();
  check_init(init);
  return run_filter(params, init,
                    [](Eigen::Index, const std::array<double, 2>&,
                       const std::array<double, 2>&,
                       const std::array<double, 2>&) {});
}

FilterOutput LikelihoodEvaluator::filter(
    const ModelParams& params, const std::array<double, 2>& init) const {
  params.check_bounds();
  check_init(init);
  const Eigen::Index T = y_.cols();
  FilterOutput out;
  out.filtered.resize(T, 2);
  out.predicted.resize(T, 2);
  out.log_densities = Eigen::MatrixXd::Zero(T, 2);

  out.filtered(0, 0) = init[0];
  out.filtered(0, 1) = init[1];
  const Eigen::Vector2d init_v(init[0], init[1]);
  out.predicted.row(0) = (params.transition.matrix() * init_v).transpose();

  out.loglik = run_filter(
      params, init,
      [&](Eigen::Index t, const std::array<double, 2>& log_eta,
          const std::array<double, 2>& lf, const std::array<double, 2>& lpred) {
        out.log_densities(t, 0) = log_eta[0];
        out.log_densities(t, 1) = log_eta[1];
        out.filtered(t, 0) = std::exp(lf[0]);
        out.filtered(t, 1) = std::exp(lf[1]);
        out.predicted(t, 0) = std::exp(lpred[0]);
        out.predicted(t, 1) = std::exp(lpred[1]);
      });
  return out;
}

double LikelihoodEvaluator::one_regime_loglik(const RegimeParams& regime,
                                              double sigma2) const {
  regime.check_bounds();
  if (!(sigma2 > 0.0)) throw ValidationError("sigma2 must be positive");
  const Eigen::Index n = y_.rows();
  const Eigen::Index T = y_.cols();
  const double log_det = log_det_i_minus_rho_w(w_, regime.rho);
  const double norm_const = -0.5 * double(n) * (kLog2Pi + std::log(sigma2));
  double ll = 0.0;
  Eigen::VectorXd u(n);
  for (Eigen::Index t = 1; t < T; ++t) {
    u = y_.col(t) - regime.rho * wy_.col(t) - regime.gamma * y_.col(t - 1) -
        regime.delta * wy_.col(t - 1) -
        Eigen::VectorXd::Constant(n, regime.phi);
    ll += log_det + norm_const - u.squaredNorm() / (2.0 * sigma2);
  }
  return ll;
}

FilterOutput hamilton_filter(const LogSquaredPanel& panel,
                             const ModelParams& params, const WeightMatrix& w,
                             const std::array<double, 2>& init) {
  LikelihoodEvaluator ev(panel, w);
  return ev.filter(params, init);
}

SmoothedPath kim_smooth(const FilterOutput& filter_out,
                        const TransitionMatrix& transition) {
  transition.check();
  const Eigen::Index T = filter_out.filtered.rows();
  if (T < 1) throw ValidationError("empty filter output");
  if (filter_out.predicted.rows() != T)
    throw ValidationError("filtered/predicted row mismatch");
  for (Eigen::Index t = 0; t < T; ++t) {
    if (std::abs(filter_out.filtered.row(t).sum() - 1.0) > 1e-8)
      throw ValidationError("filtered probabilities do not sum to 1 at row " +
                            std::to_string(t));
  }

  const double p = transition.p, q = transition.q;
  SmoothedPath out;
  out.smoothed.resize(T, 2);
  out.smoothed.row(T - 1) = filter_out.filtered.row(T - 1);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    double ratio[2];
    for (int j = 0; j < 2; ++j) {
      const double num = out.smoothed(t + 1, j);
      const double den = filter_out.predicted(t, j);
      if (den <= 0.0) {
        if (num > 0.0)
          throw NumericalError(
              "zero predicted probability with positive smoothed mass at "
              "time index " + std::to_string(t + 1) +
              " (impossible transition configuration)");
        ratio[j] = 0.0;  // 0/0: state unreachable and carries no mass
      } else {
        ratio[j] = num / den;
      }
    }
    const double v0 = p * ratio[0] + (1.0 - p) * ratio[1];
    const double v1 = (1.0 - q) * ratio[0] + q * ratio[1];
    out.smoothed(t, 0) = filter_out.filtered(t, 0) * v0;
    out.smoothed(t, 1) = filter_out.filtered(t, 1) * v1;
  }

  out.most_likely.states.resize(T);
  for (Eigen::Index t = 0; t < T; ++t)
    out.most_likely.states[t] =
        (out.smoothed(t, 0) >= out.smoothed(t, 1)) ? 1 : 2;
  return out;
}

double loglik(const ModelParams& params, const LogSquaredPanel& panel,
              const WeightMatrix& w) {
  LikelihoodEvaluator ev(panel, w);
  return ev.loglik(params, stationary_dist(params.transition));
}

}  // namespace mstarch
