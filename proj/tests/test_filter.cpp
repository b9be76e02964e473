#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "mstarch/filter.hpp"
#include "oracle_helpers.hpp"

using namespace mstarch;

namespace {

WeightMatrix queen_normalized(long rows, long cols) {
  return row_normalize(build_queen_grid(rows, cols));
}

ModelParams study_dgp() {
  ModelParams m;
  m.regimes[0] = RegimeParams::from_mu(0.2, 0.2, -0.2, 0.1);
  m.regimes[1] = RegimeParams::from_mu(0.2, 0.8, -0.2, 0.1);
  m.transition = {0.97, 0.93};
  m.sigma2 = constants::log_chi2_var;
  return m;
}

LogSquaredPanel random_panel(Eigen::Index n, Eigen::Index T,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.5);
  LogSquaredPanel p;
  p.values.resize(n, T);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index t = 0; t < T; ++t) p.values(i, t) = normal(rng);
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("filter");

TEST_CASE("log determinant: LU vs cofactor expansion") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(trial % 4);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) w(i, j) = u(rng);
    for (Eigen::Index i = 0; i < n; ++i) w.row(i) /= w.row(i).sum();
    const double rho = -0.9 + 1.8 * u(rng);

    const std::size_t un = std::size_t(n);
    std::vector<std::vector<double>> a(un, std::vector<double>(un));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        a[std::size_t(i)][std::size_t(j)] =
            (i == j ? 1.0 : 0.0) - rho * w(i, j);
    CHECK(log_det_i_minus_rho_w(w, rho) ==
          doctest::Approx(std::log(oracle::det_cofactor(a))).epsilon(1e-10));
  }
}

TEST_CASE("log determinant: LU vs eigenvalue sum on symmetric matrices") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 3 + Eigen::Index(trial % 5);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        w(i, j) = w(j, i) = (u(rng) < 0.7) ? u(rng) : 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
    const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    if (scale == 0.0) continue;
    const double rho = 0.5 / scale;
    double eig_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      eig_sum += std::log(std::abs(1.0 - rho * es.eigenvalues()[i]));
    CHECK(std::abs(log_det_i_minus_rho_w(w, rho) - eig_sum) <= 1e-8);
  }
}

TEST_CASE("log determinant error paths name rho") {
  Eigen::MatrixXd w(2, 2);
  w << 0.0, 2.0, 2.0, 0.0;
  CHECK_THROWS_WITH_AS(log_det_i_minus_rho_w(w, 0.5),
                       doctest::Contains("rho=0.5"), NumericalError);
  CHECK_THROWS_WITH_AS(log_det_i_minus_rho_w(w, 0.6),
                       doctest::Contains("rho=0.6"), NumericalError);
}

TEST_CASE("log_cond_density: n=1 reduces to a univariate normal") {
  WeightMatrix w;
  w.values = Eigen::MatrixXd::Zero(1, 1);
  w.row_normalized = true;
  const RegimeParams r{0.3, 0.4, -0.2, 0.7};
  const double sigma2 = 2.5;
  Eigen::VectorXd yt(1), ytm1(1);
  yt << 1.2;
  ytm1 << -0.4;
  // with the only weight entry zero: u = y - gamma*y' - phi, log-det = 0
  const double u = yt[0] - r.gamma * ytm1[0] - r.phi;
  const double expect =
      -0.5 * std::log(2.0 * M_PI * sigma2) - u * u / (2.0 * sigma2);
  CHECK(log_cond_density(yt, ytm1, r, sigma2, w) ==
        doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("log_cond_density: rho = 0 kills the determinant term") {
  const WeightMatrix w = queen_normalized(2, 2);
  CHECK(log_det_i_minus_rho_w(w.values, 0.0) == 0.0);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd yt(4), ytm1(4);
  for (int i = 0; i < 4; ++i) {
    yt[i] = normal(rng);
    ytm1[i] = normal(rng);
  }
  const RegimeParams r{0.0, 0.3, 0.2, -0.5};
  const double got = log_cond_density(yt, ytm1, r, 1.7, w);
  CHECK(got == doctest::Approx(oracle::log_density(w.values, r, 1.7, yt, ytm1))
                   .epsilon(1e-12));
}

TEST_CASE("log_cond_density matches the independent oracle on random n=5") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (i != j) raw(i, j) = u(rng);
    WeightMatrix w{raw, false};
    w = row_normalize(w);
    Eigen::VectorXd yt(5), ytm1(5);
    for (int i = 0; i < 5; ++i) {
      yt[i] = normal(rng);
      ytm1[i] = normal(rng);
    }
    const RegimeParams r{-0.9 + 1.8 * u(rng), -0.9 + 1.8 * u(rng),
                         -0.9 + 1.8 * u(rng), -2.0 + 4.0 * u(rng)};
    const double sigma2 = 0.5 + 4.0 * u(rng);
    const double got = log_cond_density(yt, ytm1, r, sigma2, w);
    const double want = oracle::log_density(w.values, r, sigma2, yt, ytm1);
    CHECK(std::abs(got - want) <= 1e-10 * (1.0 + std::abs(want)));
  }
}

TEST_CASE("log_cond_density rejects bad input") {
  const WeightMatrix w = queen_normalized(2, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd bad = y;
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  const RegimeParams r{0.2, 0.2, -0.2, 0.0};
  CHECK_THROWS_AS(log_cond_density(bad, y, r, 1.0, w), ValidationError);
  CHECK_THROWS_AS(log_cond_density(y, bad, r, 1.0, w), ValidationError);
  CHECK_THROWS_AS(log_cond_density(y, y, r, -1.0, w), ValidationError);
}

TEST_CASE("filter with identical regimes reproduces chain marginals") {
  std::mt19937_64 rng(55);
  const WeightMatrix w = queen_normalized(2, 2);
  LogSquaredPanel panel = random_panel(4, 12, rng);
  ModelParams m;
  m.regimes[0] = {0.2, 0.3, -0.1, 0.4};
  m.regimes[1] = m.regimes[0];
  m.transition = {0.8, 0.6};
  m.sigma2 = 2.0;

  const std::array<double, 2> init{0.3, 0.7};
  const FilterOutput fo = hamilton_filter(panel, m, w, init);

  Eigen::Vector2d marginal(init[0], init[1]);
  for (Eigen::Index t = 0; t < 12; ++t) {
    CHECK(fo.filtered(t, 0) == doctest::Approx(marginal[0]).epsilon(1e-10));
    marginal = m.transition.matrix() * marginal;
    CHECK(fo.predicted(t, 0) == doctest::Approx(marginal[0]).epsilon(1e-10));
  }

  LikelihoodEvaluator ev(panel, w);
  CHECK(fo.loglik ==
        doctest::Approx(ev.one_regime_loglik(m.regimes[0], m.sigma2))
            .epsilon(1e-12));
}

TEST_CASE("frozen chain: p = q = 1 with init (1,0)") {
  std::mt19937_64 rng(66);
  const WeightMatrix w = queen_normalized(2, 2);
  LogSquaredPanel panel = random_panel(4, 10, rng);
  ModelParams m = study_dgp();
  m.transition = {1.0, 1.0};
  const FilterOutput fo = hamilton_filter(panel, m, w, {1.0, 0.0});
  for (Eigen::Index t = 0; t < 10; ++t) {
    CHECK(fo.filtered(t, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fo.filtered(t, 1) == doctest::Approx(0.0).epsilon(1e-14));
  }
  LikelihoodEvaluator ev(panel, w);
  CHECK(fo.loglik ==
        doctest::Approx(ev.one_regime_loglik(m.regimes[0], m.sigma2))
            .epsilon(1e-12));

  SUBCASE("smoothing the frozen chain works (0/0 convention)") {
    const SmoothedPath sp = kim_smooth(fo, m.transition);
    for (Eigen::Index t = 0; t < 10; ++t)
      CHECK(sp.smoothed(t, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("filter and smoother match exhaustive path enumeration") {
  std::mt19937_64 rng(77);
  const WeightMatrix w = queen_normalized(2, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const LogSquaredPanel panel = random_panel(4, 6, rng);
    const ModelParams m = oracle::random_params(rng);
    const auto init = stationary_dist(m.transition);

    const FilterOutput fo = hamilton_filter(panel, m, w, init);
    const auto enumd = oracle::enumerate_paths(panel.values, m, w.values, init);
    CHECK(std::abs(fo.loglik - enumd.loglik) <= 1e-8);

    const SmoothedPath sp = kim_smooth(fo, m.transition);
    CHECK((sp.smoothed - enumd.posterior).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("kim_smooth seeds with the final filtered row") {
  std::mt19937_64 rng(88);
  const WeightMatrix w = queen_normalized(2, 2);
  const LogSquaredPanel panel = random_panel(4, 20, rng);
  const ModelParams m = study_dgp();
  const FilterOutput fo = hamilton_filter(panel, m, w, {0.5, 0.5});
  const SmoothedPath sp = kim_smooth(fo, m.transition);
  CHECK(sp.smoothed(19, 0) == fo.filtered(19, 0));
  CHECK(sp.smoothed(19, 1) == fo.filtered(19, 1));
}

TEST_CASE("kim_smooth: T = 1 leaves filtered untouched") {
  FilterOutput fo;
  fo.filtered.resize(1, 2);
  fo.filtered << 0.3, 0.7;
  fo.predicted.resize(1, 2);
  const TransitionMatrix tr{0.8, 0.9};
  fo.predicted = (tr.matrix() * fo.filtered.transpose()).transpose();
  fo.log_densities = Eigen::MatrixXd::Zero(1, 2);
  const SmoothedPath sp = kim_smooth(fo, tr);
  CHECK(sp.smoothed(0, 0) == 0.3);
  CHECK(sp.smoothed(0, 1) == 0.7);
}

TEST_CASE("kim_smooth rejects positive mass on an unreachable state") {
  FilterOutput fo;
  fo.filtered.resize(3, 2);
  fo.filtered << 0.3, 0.7, 0.3, 0.7, 0.3, 0.7;
  fo.predicted.resize(3, 2);
  fo.predicted << 1.0, 0.0, 1.0, 0.0, 1.0, 0.0;  // state 2 never predicted
  fo.log_densities = Eigen::MatrixXd::Zero(3, 2);
  CHECK_THROWS_WITH_AS(kim_smooth(fo, TransitionMatrix{0.9, 0.9}),
                       doctest::Contains("impossible transition"),
                       NumericalError);
}

TEST_CASE("kim_smooth with identical regimes equals the filter") {
  std::mt19937_64 rng(99);
  const WeightMatrix w = queen_normalized(2, 2);
  const LogSquaredPanel panel = random_panel(4, 15, rng);
  ModelParams m;
  m.regimes[0] = {0.1, 0.5, 0.0, -0.3};
  m.regimes[1] = m.regimes[0];
  m.transition = {0.9, 0.7};
  m.sigma2 = 3.0;
  const FilterOutput fo =
      hamilton_filter(panel, m, w, stationary_dist(m.transition));
  const SmoothedPath sp = kim_smooth(fo, m.transition);
  CHECK((sp.smoothed - fo.filtered).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("loglik wrapper") {
  std::mt19937_64 rng(111);
  const WeightMatrix w = queen_normalized(3, 3);
  const LogSquaredPanel panel = random_panel(9, 25, rng);
  const ModelParams m = study_dgp();

  SUBCASE("equals the filter's loglik") {
    const FilterOutput fo =
        hamilton_filter(panel, m, w, stationary_dist(m.transition));
    CHECK(loglik(m, panel, w) == fo.loglik);
  }
  SUBCASE("invariant under a regime-label swap") {
    CHECK(loglik(m, panel, w) ==
          doctest::Approx(loglik(m.swapped(), panel, w)).epsilon(1e-12));
  }
  SUBCASE("matches enumeration on a small instance") {
    const LogSquaredPanel small = random_panel(4, 6, rng);
    const WeightMatrix w4 = queen_normalized(2, 2);
    const auto init = stationary_dist(m.transition);
    const auto enumd =
        oracle::enumerate_paths(small.values, m, w4.values, init);
    CHECK(std::abs(loglik(m, small, w4) - enumd.loglik) <= 1e-8);
  }
}

TEST_CASE("loglik recomputable from per-step normalizers") {
  std::mt19937_64 rng(123);
  const WeightMatrix w = queen_normalized(2, 3);
  const LogSquaredPanel panel = random_panel(6, 30, rng);
  const ModelParams m = oracle::random_params(rng);
  const FilterOutput fo = hamilton_filter(panel, m, w, {0.5, 0.5});
  double recomputed = 0.0;
  for (Eigen::Index t = 1; t < 30; ++t) {
    recomputed += std::log(
        fo.predicted(t - 1, 0) * std::exp(fo.log_densities(t, 0)) +
        fo.predicted(t - 1, 1) * std::exp(fo.log_densities(t, 1)));
  }
  CHECK(fo.loglik == doctest::Approx(recomputed).epsilon(1e-10));
}

TEST_CASE("probability rows sum to one (property)") {
  std::mt19937_64 rng(137);
  const WeightMatrix w = queen_normalized(2, 2);
  for (int trial = 0; trial < 30; ++trial) {
    const LogSquaredPanel panel = random_panel(4, 40, rng);
    const ModelParams m = oracle::random_params(rng);
    const auto init = stationary_dist(m.transition);
    const FilterOutput fo = hamilton_filter(panel, m, w, init);
    const SmoothedPath sp = kim_smooth(fo, m.transition);
    for (Eigen::Index t = 0; t < 40; ++t) {
      CHECK(std::abs(fo.filtered.row(t).sum() - 1.0) <= 1e-10);
      CHECK(std::abs(fo.predicted.row(t).sum() - 1.0) <= 1e-10);
      CHECK(std::abs(sp.smoothed.row(t).sum() - 1.0) <= 1e-10);
      CHECK(fo.filtered.row(t).minCoeff() >= 0.0);
      CHECK(fo.filtered.row(t).maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("log-space stability under a huge outlier") {
  std::mt19937_64 rng(149);
  const WeightMatrix w = queen_normalized(3, 3);
  LogSquaredPanel panel = random_panel(9, 50, rng);
  panel.values(4, 25) = 1e6;
  const ModelParams m = study_dgp();
  const FilterOutput fo =
      hamilton_filter(panel, m, w, stationary_dist(m.transition));
  CHECK(std::isfinite(fo.loglik));
  CHECK(fo.filtered.allFinite());
  const SmoothedPath sp = kim_smooth(fo, m.transition);
  CHECK(sp.smoothed.allFinite());
}

TEST_CASE("filter reports the period where both densities vanish") {
  const WeightMatrix w = queen_normalized(2, 2);
  LogSquaredPanel panel;
  panel.values = Eigen::MatrixXd::Zero(4, 5);
  panel.values.col(3).setConstant(1e200);  // U'U overflows at t index 3
  CHECK_THROWS_WITH_AS(
      hamilton_filter(panel, study_dgp(), w, {0.5, 0.5}),
      doctest::Contains("time index 3"), NumericalError);
}

TEST_CASE("loglik at the truth beats heavily perturbed parameters") {
  const WeightMatrix w = queen_normalized(3, 3);
  const ModelParams truth = study_dgp();
  int wins = 0;
  const int trials = 50;
  std::mt19937_64 rng(161);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < trials; ++trial) {
    const SimulationResult sim =
        simulate(truth, w, 200, 100, derive_seed(500, trial));
    ModelParams pert = truth;
    auto flip = [&] { return coin(rng) == 0 ? 0.5 : -0.5; };
    for (int s = 0; s < 2; ++s) {
      RegimeParams& r = pert.regimes[s];
      r.rho = std::clamp(r.rho + flip(), -0.9, 0.9);
      r.gamma = std::clamp(r.gamma + flip(), -0.9, 0.9);
      r.delta = std::clamp(r.delta + flip(), -0.9, 0.9);
      if (r.rho + r.delta >= 0.95) r.delta = 0.95 - r.rho - 0.05;
      r.phi += flip();
    }
    pert.transition.p = std::clamp(pert.transition.p + flip(), 0.05, 0.995);
    pert.transition.q = std::clamp(pert.transition.q + flip(), 0.05, 0.995);
    pert.sigma2 *= std::exp(flip());
    if (loglik(truth, sim.log_squared, w) > loglik(pert, sim.log_squared, w))
      ++wins;
  }
  CHECK(wins >= 48);  // >= 95% of 50
}

TEST_CASE("smoothing is at least as sharp as filtering") {
  const WeightMatrix w = queen_normalized(4, 4);
  const ModelParams m = study_dgp();
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const SimulationResult sim = simulate(m, w, 300, 100, seed);
    const FilterOutput fo = hamilton_filter(sim.log_squared, m, w,
                                            stationary_dist(m.transition));
    const SmoothedPath sp = kim_smooth(fo, m.transition);
    const double mean_max_filtered =
        fo.filtered.rowwise().maxCoeff().mean();
    const double mean_max_smoothed =
        sp.smoothed.rowwise().maxCoeff().mean();
    CHECK(mean_max_smoothed >= mean_max_filtered - 1e-12);
  }
}

TEST_CASE("evaluator validates its inputs") {
  std::mt19937_64 rng(173);
  const LogSquaredPanel panel = random_panel(4, 10, rng);
  WeightMatrix raw = build_queen_grid(2, 2);
  CHECK_THROWS_AS(LikelihoodEvaluator(panel, raw), ValidationError);
  const WeightMatrix w9 = queen_normalized(3, 3);
  CHECK_THROWS_AS(LikelihoodEvaluator(panel, w9), ValidationError);
  LogSquaredPanel bad = panel;
  bad.values(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(LikelihoodEvaluator(bad, queen_normalized(2, 2)),
                  ValidationError);
}

TEST_SUITE_END();
