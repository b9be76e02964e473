#include "mstarch/model.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mstarch {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

bool RegimeParams::valid() const {
  return std::abs(rho) < 1.0 && std::abs(gamma) < 1.0 &&
         std::abs(delta) < 1.0 && rho + delta < 1.0 && std::isfinite(phi);
}

void RegimeParams::check_bounds(const std::string& label) const {
  const std::string at = label.empty() ? "" : " (" + label + ")";
  require(std::isfinite(rho) && std::abs(rho) < 1.0,
          "rho" + at + " out of (-1, 1): " + fmt(rho));
  require(std::isfinite(gamma) && std::abs(gamma) < 1.0,
          "gamma" + at + " out of (-1, 1): " + fmt(gamma));
  require(std::isfinite(delta) && std::abs(delta) < 1.0,
          "delta" + at + " out of (-1, 1): " + fmt(delta));
  require(std::isfinite(phi), "phi" + at + " must be finite");
}

void RegimeParams::check(const std::string& label) const {
  check_bounds(label);
  const std::string at = label.empty() ? "" : " (" + label + ")";
  require(rho + delta < 1.0,
          "rho + delta" + at + " must be < 1: " + fmt(rho + delta));
}

void TransitionMatrix::check() const {
  require(std::isfinite(p) && p > 0.0 && p <= 1.0,
          "p out of (0, 1]: " + fmt(p));
  require(std::isfinite(q) && q > 0.0 && q <= 1.0,
          "q out of (0, 1]: " + fmt(q));
}

void ModelParams::check() const {
  regimes[0].check("regime 1");
  regimes[1].check("regime 2");
  transition.check();
  require(std::isfinite(sigma2) && sigma2 > 0.0,
          "sigma2 must be positive: " + fmt(sigma2));
}

void ModelParams::check_bounds() const {
  regimes[0].check_bounds("regime 1");
  regimes[1].check_bounds("regime 2");
  transition.check();
  require(std::isfinite(sigma2) && sigma2 > 0.0,
          "sigma2 must be positive: " + fmt(sigma2));
}

ModelParams ModelParams::swapped() const {
  ModelParams out = *this;
  std::swap(out.regimes[0], out.regimes[1]);
  std::swap(out.transition.p, out.transition.q);
  return out;
}

void Panel::check() const {
  require(values.rows() >= 1 && values.cols() >= 1, "panel is empty");
  require(location_ids.empty() ||
              Eigen::Index(location_ids.size()) == values.rows(),
          "location_ids length does not match panel rows");
  require(time_ids.empty() || Eigen::Index(time_ids.size()) == values.cols(),
          "time_ids length does not match panel columns");
  auto unique_labels = [](const std::vector<std::string>& v) {
    std::vector<std::string> s = v;
    std::sort(s.begin(), s.end());
    return std::adjacent_find(s.begin(), s.end()) == s.end();
  };
  require(unique_labels(location_ids), "duplicate location ids");
  require(unique_labels(time_ids), "duplicate time ids");
}

std::array<double, 2> stationary_dist(const TransitionMatrix& transition) {
  transition.check();
  const double p = transition.p, q = transition.q;
  if (p == 1.0 && q == 1.0)
    throw ValidationError(
        "p = q = 1 gives a reducible chain; an explicit initial "
        "distribution is required");
  if (p == 1.0) return {1.0, 0.0};
  if (q == 1.0) return {0.0, 1.0};
  const double pi1 = (1.0 - q) / (2.0 - p - q);
  return {pi1, 1.0 - pi1};
}

LogSquaredPanel log_square(const Panel& panel, const ZeroPolicy& zero_policy) {
  panel.check();
  LogSquaredPanel out;
  out.location_ids = panel.location_ids;
  out.time_ids = panel.time_ids;
  out.values.resize(panel.n(), panel.T());
  for (Eigen::Index i = 0; i < panel.n(); ++i) {
    const Eigen::VectorXd row = panel.values.row(i);
    double sd = 0.0;
    if (row.size() > 1) {
      const double mean = row.mean();
      sd = std::sqrt((row.array() - mean).square().sum() /
                     double(row.size() - 1));
    }
    const double floor_y = zero_policy.floor_for(sd);
    for (Eigen::Index t = 0; t < panel.T(); ++t) {
      double y = panel.values(i, t);
      if (!std::isfinite(y))
        throw ValidationError("panel has a non-finite value at location " +
                              std::to_string(i) + ", time " +
                              std::to_string(t));
      if (y == 0.0) {
        y = floor_y;
        ++out.zero_replacements;
      }
      out.values(i, t) = std::log(y * y);
    }
  }
  return out;
}

SimulationResult simulate(const ModelParams& params, const WeightMatrix& w,
                          long T, long burn_in, std::uint64_t seed) {
  params.check();
  w.check();
  require(w.row_normalized, "simulate requires a row-normalized weight matrix");
  require(T >= 2, "simulate requires T >= 2");
  require(burn_in >= 0, "burn_in must be non-negative");

  const Eigen::Index n = w.n();
  const long total = T + burn_in;

  // One LU per regime; rho is fixed within a run.
  std::array<Eigen::PartialPivLU<Eigen::MatrixXd>, 2> lu;
  for (int s = 0; s < 2; ++s) {
    const double rho = params.regimes[s].rho;
    Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(n, n) - rho * w.values;
    lu[s].compute(a);
    const double min_pivot = lu[s].matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(min_pivot > 1e-12))
      throw NumericalError("(I - rho*W) is numerically singular for rho=" +
                           fmt(rho));
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Regime path first, then the disturbance field, in a fixed draw order.
  const auto pi = stationary_dist(params.transition);
  std::vector<int> states(total);
  states[0] = (unif(rng) < pi[0]) ? 1 : 2;
  for (long t = 1; t < total; ++t) {
    const double stay = (states[t - 1] == 1) ? params.transition.p
                                             : params.transition.q;
    states[t] = (unif(rng) < stay) ? states[t - 1] : (3 - states[t - 1]);
  }

  Eigen::MatrixXd eps(n, total);
  for (long t = 0; t < total; ++t)
    for (Eigen::Index i = 0; i < n; ++i) eps(i, t) = normal(rng);

  Eigen::MatrixXd estar = eps.array().square().log().matrix();
  Eigen::MatrixXd ystar(n, total);
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd rhs(n);
  for (long t = 0; t < total; ++t) {
    const int s = states[t] - 1;
    const RegimeParams& r = params.regimes[s];
    rhs = r.gamma * prev + r.delta * (w.values * prev) +
          Eigen::VectorXd::Constant(n, r.mu0()) + estar.col(t);
    ystar.col(t) = lu[s].solve(rhs);
    prev = ystar.col(t);
  }

  SimulationResult out;
  out.innovations = estar.rightCols(T);
  out.initial_lag = (burn_in > 0) ? Eigen::VectorXd(ystar.col(burn_in - 1))
                                  : Eigen::VectorXd(Eigen::VectorXd::Zero(n));
  out.panel.values.resize(n, T);
  out.log_squared.values = ystar.rightCols(T);
  for (Eigen::Index i = 0; i < n; ++i)
    for (long t = 0; t < T; ++t)
      out.panel.values(i, t) = std::copysign(
          std::exp(out.log_squared.values(i, t) / 2.0), eps(i, burn_in + t));

  out.panel.location_ids.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.panel.location_ids.push_back("loc" + std::to_string(i + 1));
  out.panel.time_ids.reserve(T);
  for (long t = 0; t < T; ++t)
    out.panel.time_ids.push_back(std::to_string(t + 1));
  out.log_squared.location_ids = out.panel.location_ids;
  out.log_squared.time_ids = out.panel.time_ids;
  out.log_squared.zero_replacements = 0;

  out.path.states.assign(states.begin() + burn_in, states.end());
  return out;
}

}  // namespace mstarch
