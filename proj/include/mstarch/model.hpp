#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mstarch/common.hpp"
#include "mstarch/weights.hpp"

namespace mstarch {

// One regime's coefficients. The intercept is stored on the phi scale of
// the estimated (centered) model: phi = mu0 + mu_eps, where mu0 is the
// intercept of the data-generating recursion with raw log chi^2 errors.
struct RegimeParams {
  double rho = 0.0;    // spatial effect
  double gamma = 0.0;  // temporal effect
  double delta = 0.0;  // spatio-temporal effect
  double phi = constants::mu_eps;  // intercept, centered scale

  double mu0() const { return phi - constants::mu_eps; }
  static RegimeParams from_mu(double rho, double gamma, double delta,
                              double mu0) {
    return {rho, gamma, delta, mu0 + constants::mu_eps};
  }

  bool valid() const;
  void check(const std::string& label = {}) const;  // throws ValidationError
  // Bounds only (|rho|, |gamma|, |delta| < 1, finite phi); the density is
  // well-defined here even when rho + delta >= 1 breaks stationarity.
  void check_bounds(const std::string& label = {}) const;
};

// Stay probabilities of the two regimes. The implied matrix is
//   P = [[p, 1-q], [1-p, q]]
// whose columns sum to one; column j is the distribution of s_t given
// s_{t-1} = j. Exactly 1 is accepted (absorbing regime).
struct TransitionMatrix {
  double p = 0.5;
  double q = 0.5;

  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << p, 1.0 - q, 1.0 - p, q;
    return m;
  }
  void check() const;
};

struct ModelParams {
  std::array<RegimeParams, 2> regimes;
  TransitionMatrix transition;
  double sigma2 = constants::log_chi2_var;  // disturbance variance

  void check() const;
  void check_bounds() const;
  ModelParams swapped() const;  // regimes exchanged, p <-> q
};

// Raw observations y_it, locations in rows, time in columns.
struct Panel {
  Eigen::MatrixXd values;  // n x T
  std::vector<std::string> location_ids;
  std::vector<std::string> time_ids;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index T() const { return values.cols(); }
  void check() const;
};

// Y*_t = log y_t^2 columns.
struct LogSquaredPanel {
  Eigen::MatrixXd values;  // n x T
  std::vector<std::string> location_ids;
  std::vector<std::string> time_ids;
  long zero_replacements = 0;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index T() const { return values.cols(); }
};

struct RegimePath {
  std::vector<int> states;  // entries in {1, 2}
};

struct SimulationResult {
  Panel panel;
  LogSquaredPanel log_squared;
  RegimePath path;
  Eigen::MatrixXd innovations;  // E*_t = log eps_t^2 columns, n x T
  Eigen::VectorXd initial_lag;  // Y*_0, the lag conditioning the first period
};

// Simulates the two-regime process: the regime path is drawn from the
// Markov chain started at its stationary distribution, then per period
//   Y*_t = (I - rho_s W)^{-1} (gamma_s Y*_{t-1} + delta_s W Y*_{t-1}
//                              + mu0_s 1 + E*_t),
// with E*_it = log eps_it^2, eps iid standard normal, and
// y_it = sign(eps_it) exp(Y*_it / 2). The first `burn_in` periods are
// discarded. Bit-reproducible for fixed (params, w, T, burn_in, seed).
SimulationResult simulate(const ModelParams& params, const WeightMatrix& w,
                          long T, long burn_in, std::uint64_t seed);

LogSquaredPanel log_square(const Panel& panel,
                           const ZeroPolicy& zero_policy = {});

// Stationary distribution of the chain, pi1 = (1-q)/(2-p-q). Absorbing
// chains (exactly one of p, q equal to 1) collapse to a point mass;
// p = q = 1 is reducible and rejected.
std::array<double, 2> stationary_dist(const TransitionMatrix& transition);

}  // namespace mstarch
