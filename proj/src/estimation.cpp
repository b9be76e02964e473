#include "mstarch/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mstarch/optim.hpp"

namespace mstarch {

namespace {

constexpr double kBadObjective = 1e100;
constexpr double kPenaltyWeight = 1e8;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double stationarity_penalty(const RegimeParams& r) {
  const double excess = r.rho + r.delta - 1.0;
  return excess > 0.0 ? kPenaltyWeight * excess * excess : 0.0;
}

ModelParams model_from_constrained(const ParamVector& c) {
  ModelParams m;
  m.regimes[0] = {c[0], c[1], c[2], c[3]};
  m.regimes[1] = {c[4], c[5], c[6], c[7]};
  m.transition = {c[8], c[9]};
  m.sigma2 = c[10];
  return m;
}

OneRegimeParams one_from_constrained(const ParamVector& c) {
  return {{c[0], c[1], c[2], c[3]}, c[4]};
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / M_SQRT2); }

struct StartOutcome {
  optim::Result stage;  // final (BFGS) stage
  int iterations = 0;
  bool converged = false;
};

StartOutcome run_schedule(const optim::Objective& objective,
                          const ParamVector& start, const FitOptions& opt) {
  StartOutcome out;
  optim::Result nm =
      optim::nelder_mead(objective, start, opt.tol, opt.max_iterations);
  optim::Result bf = optim::bfgs(objective, nm.x, opt.tol,
                                 std::min(opt.max_iterations, 300));
  if (!(bf.f <= nm.f)) bf = nm;  // polish must not lose ground
  out.stage = bf;
  out.iterations = nm.iterations + bf.iterations;
  out.converged = bf.converged || nm.converged;
  return out;
}

void check_options(const FitOptions& opt) {
  if (opt.n_starts < 1) throw ValidationError("n_starts must be >= 1");
  if (!(opt.tol > 0.0)) throw ValidationError("tol must be positive");
  if (opt.max_iterations < 1)
    throw ValidationError("max_iterations must be >= 1");
}

// Hessian steps that stay inside the parameter bounds.
Eigen::VectorXd bounded_steps(const ParamVector& c, int n_regimes) {
  const Eigen::Index k = c.size();
  Eigen::VectorXd steps(k);
  for (Eigen::Index i = 0; i < k; ++i)
    steps[i] = 1e-4 * (1.0 + std::abs(c[i]));
  auto clamp_to = [&](Eigen::Index i, double lo, double hi) {
    steps[i] = std::min(steps[i], 0.45 * std::min(c[i] - lo, hi - c[i]));
    steps[i] = std::max(steps[i], 1e-10);
  };
  if (n_regimes == 2) {
    for (Eigen::Index i : {0, 1, 2, 4, 5, 6}) clamp_to(i, -1.0, 1.0);
    clamp_to(8, 0.0, 1.0);
    clamp_to(9, 0.0, 1.0);
    steps[10] = std::min(steps[10], 0.45 * c[10]);
  } else {
    for (Eigen::Index i : {0, 1, 2}) clamp_to(i, -1.0, 1.0);
    steps[4] = std::min(steps[4], 0.45 * c[4]);
  }
  return steps;
}

}  // namespace

double logistic_map(double u, double a, double b) {
  if (u >= 0.0) return a + (b - a) / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return a + (b - a) * e / (1.0 + e);
}

double logistic_unmap(double x, double a, double b) {
  if (!(x > a && x < b))
    throw ValidationError("value " + std::to_string(x) + " outside (" +
                          std::to_string(a) + ", " + std::to_string(b) + ")");
  return std::log((x - a) / (b - x));
}

ModelParams to_constrained(const ParamVector& v) {
  if (v.size() != 11)
    throw ValidationError("two-regime parameter vector must have length 11");
  ModelParams m;
  m.regimes[0] = {logistic_map(v[0], -1.0, 1.0), logistic_map(v[1], -1.0, 1.0),
                  logistic_map(v[2], -1.0, 1.0), v[3]};
  m.regimes[1] = {logistic_map(v[4], -1.0, 1.0), logistic_map(v[5], -1.0, 1.0),
                  logistic_map(v[6], -1.0, 1.0), v[7]};
  m.transition = {logistic_map(v[8], 0.0, 1.0), logistic_map(v[9], 0.0, 1.0)};
  m.sigma2 = std::exp(v[10]);
  return m;
}

ParamVector to_unconstrained(const ModelParams& m) {
  ParamVector v(11);
  v << logistic_unmap(m.regimes[0].rho, -1.0, 1.0),
      logistic_unmap(m.regimes[0].gamma, -1.0, 1.0),
      logistic_unmap(m.regimes[0].delta, -1.0, 1.0), m.regimes[0].phi,
      logistic_unmap(m.regimes[1].rho, -1.0, 1.0),
      logistic_unmap(m.regimes[1].gamma, -1.0, 1.0),
      logistic_unmap(m.regimes[1].delta, -1.0, 1.0), m.regimes[1].phi,
      logistic_unmap(m.transition.p, 0.0, 1.0),
      logistic_unmap(m.transition.q, 0.0, 1.0), std::log(m.sigma2);
  return v;
}

OneRegimeParams one_regime_to_constrained(const ParamVector& v) {
  if (v.size() != 5)
    throw ValidationError("one-regime parameter vector must have length 5");
  return {{logistic_map(v[0], -1.0, 1.0), logistic_map(v[1], -1.0, 1.0),
           logistic_map(v[2], -1.0, 1.0), v[3]},
          std::exp(v[4])};
}

ParamVector one_regime_to_unconstrained(const OneRegimeParams& m) {
  ParamVector v(5);
  v << logistic_unmap(m.regime.rho, -1.0, 1.0),
      logistic_unmap(m.regime.gamma, -1.0, 1.0),
      logistic_unmap(m.regime.delta, -1.0, 1.0), m.regime.phi,
      std::log(m.sigma2);
  return v;
}

ParamVector EstimationResult::constrained_vector() const {
  if (n_regimes == 2) {
    ParamVector c(11);
    c << params.regimes[0].rho, params.regimes[0].gamma,
        params.regimes[0].delta, params.regimes[0].phi, params.regimes[1].rho,
        params.regimes[1].gamma, params.regimes[1].delta, params.regimes[1].phi,
        params.transition.p, params.transition.q, params.sigma2;
    return c;
  }
  ParamVector c(5);
  c << params.regimes[0].rho, params.regimes[0].gamma, params.regimes[0].delta,
      params.regimes[0].phi, params.sigma2;
  return c;
}

double bic(double loglik, int n_params, double n_obs) {
  if (!(n_obs >= 1.0)) throw ValidationError("n_obs must be >= 1");
  return double(n_params) * std::log(n_obs) - 2.0 * loglik;
}

namespace {

std::vector<ParamVector> two_regime_starts(double y_mean,
                                           const FitOptions& opt) {
  std::vector<ParamVector> starts;
  ModelParams neutral;
  neutral.regimes[0] = {0.1, 0.1, 0.1, 0.7 * y_mean};
  neutral.regimes[1] = {0.1, 0.1, 0.1, 0.7 * y_mean};
  neutral.transition = {0.9, 0.9};
  neutral.sigma2 = constants::log_chi2_var;
  starts.push_back(to_unconstrained(neutral));

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto u = [&](double a, double b) { return a + (b - a) * unif(rng); };
  for (int r = 1; r < opt.n_starts; ++r) {
    ModelParams m;
    for (int s = 0; s < 2; ++s) {
      double rho, delta;
      do {
        rho = u(-0.5, 0.5);
        delta = u(-0.5, 0.5);
      } while (rho + delta > 0.9);
      const double gamma = u(-0.5, 0.9);
      const double phi =
          (1.0 - rho - gamma - delta) * y_mean + u(-1.0, 1.0);
      m.regimes[s] = {rho, gamma, delta, phi};
    }
    m.transition = {u(0.7, 0.98), u(0.7, 0.98)};
    m.sigma2 = constants::log_chi2_var * std::exp(u(-0.5, 0.5));
    starts.push_back(to_unconstrained(m));
  }
  return starts;
}

std::vector<ParamVector> one_regime_starts(double y_mean,
                                           const FitOptions& opt) {
  std::vector<ParamVector> starts;
  OneRegimeParams neutral{{0.1, 0.1, 0.1, 0.7 * y_mean},
                          constants::log_chi2_var};
  starts.push_back(one_regime_to_unconstrained(neutral));

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto u = [&](double a, double b) { return a + (b - a) * unif(rng); };
  for (int r = 1; r < opt.n_starts; ++r) {
    double rho, delta;
    do {
      rho = u(-0.5, 0.5);
      delta = u(-0.5, 0.5);
    } while (rho + delta > 0.9);
    const double gamma = u(-0.5, 0.9);
    OneRegimeParams m{{rho, gamma, delta,
                       (1.0 - rho - gamma - delta) * y_mean + u(-1.0, 1.0)},
                      constants::log_chi2_var * std::exp(u(-0.5, 0.5))};
    starts.push_back(one_regime_to_unconstrained(m));
  }
  return starts;
}

}  // namespace

EstimationResult fit_two_regime(const LogSquaredPanel& panel,
                                const WeightMatrix& w,
                                const FitOptions& options) {
  check_options(options);
  LikelihoodEvaluator ev(panel, w);

  const optim::Objective objective = [&](const ParamVector& u) -> double {
    if (!u.allFinite()) return kBadObjective;
    const ModelParams m = to_constrained(u);
    const double pen =
        stationarity_penalty(m.regimes[0]) + stationarity_penalty(m.regimes[1]);
    try {
      const double ll = ev.loglik(m, stationary_dist(m.transition));
      return std::isfinite(ll) ? -ll + pen : kBadObjective;
    } catch (const NumericalError&) {
      return kBadObjective;
    } catch (const ValidationError&) {
      return kBadObjective;  // logistic map saturated at a bound
    }
  };

  const auto starts = two_regime_starts(ev.y_mean(), options);
  StartOutcome best;
  best.stage.f = kBadObjective;
  for (const auto& s : starts) {
    StartOutcome outcome = run_schedule(objective, s, options);
    if (outcome.stage.f < best.stage.f) best = outcome;
  }
  if (best.stage.f >= kBadObjective)
    throw NumericalError(
        "two-regime likelihood was non-finite at every start point");

  ModelParams m = to_constrained(best.stage.x);
  if (m.regimes[0].gamma > m.regimes[1].gamma) m = m.swapped();
  for (int s = 0; s < 2; ++s)
    if (m.regimes[s].rho + m.regimes[s].delta >= 1.0)
      throw NumericalError(
          "returned optimum violates rho + delta < 1 despite the penalty");

  EstimationResult res;
  res.params = m;
  res.n_regimes = 2;
  res.loglik = ev.loglik(m, stationary_dist(m.transition));
  res.n_obs = long(ev.n()) * long(ev.T() - 1);
  res.n_params = 11;
  res.bic = bic(res.loglik, res.n_params, double(res.n_obs));
  res.converged = best.converged;
  res.iterations = best.iterations;
  res.start_points_tried = int(starts.size());
  res.std_errors = Eigen::VectorXd::Constant(11, kNan);
  res.p_values = Eigen::VectorXd::Constant(11, kNan);
  if (options.compute_std_errors && res.converged)
    std_errors(res, panel, w);
  return res;
}

EstimationResult fit_one_regime(const LogSquaredPanel& panel,
                                const WeightMatrix& w,
                                const FitOptions& options) {
  check_options(options);
  LikelihoodEvaluator ev(panel, w);

  const optim::Objective objective = [&](const ParamVector& u) -> double {
    if (!u.allFinite()) return kBadObjective;
    const OneRegimeParams m = one_regime_to_constrained(u);
    const double pen = stationarity_penalty(m.regime);
    try {
      const double ll = ev.one_regime_loglik(m.regime, m.sigma2);
      return std::isfinite(ll) ? -ll + pen : kBadObjective;
    } catch (const NumericalError&) {
      return kBadObjective;
    } catch (const ValidationError&) {
      return kBadObjective;  // logistic map saturated at a bound
    }
  };

  const auto starts = one_regime_starts(ev.y_mean(), options);
  StartOutcome best;
  best.stage.f = kBadObjective;
  for (const auto& s : starts) {
    StartOutcome outcome = run_schedule(objective, s, options);
    if (outcome.stage.f < best.stage.f) best = outcome;
  }
  if (best.stage.f >= kBadObjective)
    throw NumericalError(
        "one-regime likelihood was non-finite at every start point");

  const OneRegimeParams m = one_regime_to_constrained(best.stage.x);
  if (m.regime.rho + m.regime.delta >= 1.0)
    throw NumericalError(
        "returned optimum violates rho + delta < 1 despite the penalty");

  EstimationResult res;
  res.params.regimes = {m.regime, m.regime};
  res.params.transition = {0.5, 0.5};
  res.params.sigma2 = m.sigma2;
  res.n_regimes = 1;
  res.loglik = ev.one_regime_loglik(m.regime, m.sigma2);
  res.n_obs = long(ev.n()) * long(ev.T() - 1);
  res.n_params = 5;
  res.bic = bic(res.loglik, res.n_params, double(res.n_obs));
  res.converged = best.converged;
  res.iterations = best.iterations;
  res.start_points_tried = int(starts.size());
  res.std_errors = Eigen::VectorXd::Constant(5, kNan);
  res.p_values = Eigen::VectorXd::Constant(5, kNan);
  if (options.compute_std_errors && res.converged)
    std_errors(res, panel, w);
  return res;
}

Eigen::VectorXd std_errors(EstimationResult& result,
                           const LogSquaredPanel& panel,
                           const WeightMatrix& w) {
  if (!result.converged)
    throw ValidationError("standard errors require a converged fit");
  LikelihoodEvaluator ev(panel, w);
  const ParamVector c = result.constrained_vector();
  const int n_regimes = result.n_regimes;

  const optim::Objective neg_ll = [&](const ParamVector& x) -> double {
    try {
      double ll;
      if (n_regimes == 2) {
        const ModelParams m = model_from_constrained(x);
        ll = ev.loglik(m, stationary_dist(m.transition));
      } else {
        const OneRegimeParams m = one_from_constrained(x);
        ll = ev.one_regime_loglik(m.regime, m.sigma2);
      }
      return std::isfinite(ll) ? -ll : kBadObjective;
    } catch (const std::exception&) {
      return kBadObjective;
    }
  };

  const Eigen::VectorXd steps = bounded_steps(c, n_regimes);
  const Eigen::MatrixXd hessian = optim::hessian_central(neg_ll, c, steps);
  auto [se, ok] = optim::std_errors_from_hessian(hessian);
  result.std_errors = se;
  result.se_reliable = ok;
  result.p_values = Eigen::VectorXd::Constant(c.size(), kNan);
  if (ok)
    for (Eigen::Index i = 0; i < c.size(); ++i)
      result.p_values[i] = normal_two_sided_p(c[i] / se[i]);
  return result.std_errors;
}

}  // namespace mstarch
