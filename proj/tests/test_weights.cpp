#include <doctest.h>

#include <random>

#include "mstarch/weights.hpp"

using namespace mstarch;

TEST_SUITE_BEGIN("weights");

TEST_CASE("queen grid 3x3 neighbor counts") {
  const WeightMatrix w = build_queen_grid(3, 3);
  REQUIRE(w.n() == 9);
  // corners 3, edges 5, center 8
  const std::vector<int> expected = {3, 5, 3, 5, 8, 5, 3, 5, 3};
  for (int i = 0; i < 9; ++i)
    CHECK(w.values.row(i).sum() == doctest::Approx(expected[i]));
  w.check();
}

TEST_CASE("queen grid 1x1 has no neighbors") {
  const WeightMatrix w = build_queen_grid(1, 1);
  REQUIRE(w.n() == 1);
  CHECK(w.values(0, 0) == 0.0);
}

TEST_CASE("queen grid 2x2: every cell has 3 neighbors") {
  const WeightMatrix w = build_queen_grid(2, 2);
  for (int i = 0; i < 4; ++i) CHECK(w.values.row(i).sum() == 3.0);
}

TEST_CASE("queen grid rejects absurd sizes") {
  CHECK_THROWS_AS(build_queen_grid(0, 3), ValidationError);
  CHECK_THROWS_AS(build_queen_grid(100000, 100000), ValidationError);
}

TEST_CASE("queen grid is symmetric") {
  for (auto [r, c] : {std::pair{3, 4}, {1, 7}, {5, 5}}) {
    const WeightMatrix w = build_queen_grid(r, c);
    CHECK((w.values - w.values.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("row_normalize basics") {
  WeightMatrix w;
  w.values = Eigen::MatrixXd::Zero(3, 3);
  w.values(0, 1) = 1.0;
  w.values(0, 2) = 0.0;
  w.values(1, 0) = 1.0;
  w.values(1, 2) = 1.0;
  const WeightMatrix out = row_normalize(w);
  CHECK(out.values(0, 1) == 1.0);
  CHECK(out.values(1, 0) == 0.5);
  CHECK(out.values(1, 2) == 0.5);
  CHECK(out.row_normalized);
  out.check();

  SUBCASE("idempotent") {
    const WeightMatrix again = row_normalize(out);
    CHECK((again.values - out.values).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("preserves the zero pattern") {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK((out.values(i, j) == 0.0) == (w.values(i, j) == 0.0));
  }
}

TEST_CASE("row_normalize reports zero rows") {
  WeightMatrix w;
  w.values = Eigen::MatrixXd::Zero(1, 1);
  std::vector<Eigen::Index> zero_rows;
  const WeightMatrix out = row_normalize(w, &zero_rows);
  CHECK(out.values(0, 0) == 0.0);
  REQUIRE(zero_rows.size() == 1);
  CHECK(zero_rows[0] == 0);
}

TEST_CASE("fit_log_arch recovers an exact linear relation") {
  // log y_t^2 = 0.5 log y_{t-1}^2 exactly
  const int T = 30;
  Eigen::VectorXd series(T);
  double l = 4.0;
  for (int t = 0; t < T; ++t) {
    series[t] = std::exp(l / 2.0);
    l *= 0.5;
  }
  const UnivariateLogArchFit fit = fit_log_arch(series, 1);
  CHECK(fit.coefficients[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(fit.constant == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(fit.residual_variance <= 1e-12);
}

TEST_CASE("fit_log_arch recovers an exact order-2 relation") {
  // log y_t^2 = 0.3 log y_{t-1}^2 + 0.2 log y_{t-2}^2 exactly
  const int T = 25;
  std::vector<double> l(T);
  l[0] = 1.0;
  l[1] = 0.8;
  for (int t = 2; t < T; ++t) l[t] = 0.3 * l[t - 1] + 0.2 * l[t - 2];
  Eigen::VectorXd series(T);
  for (int t = 0; t < T; ++t) series[t] = std::exp(l[t] / 2.0);
  const UnivariateLogArchFit fit = fit_log_arch(series, 2);
  REQUIRE(fit.coefficients.size() == 2);
  CHECK(fit.coefficients[0] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(fit.coefficients[1] == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(fit.constant == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(fit.residual_variance <= 1e-10);
}

TEST_CASE("fit_log_arch is consistent on a log-ARCH(1) DGP") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int T = 10000;
  const double gamma = 0.5, omega = -1.0;
  Eigen::VectorXd y(T);
  double prev_l = omega / (1.0 - gamma);
  for (int t = 0; t < T; ++t) {
    const double eps = normal(rng);
    const double log_h = omega + gamma * prev_l;
    y[t] = std::sqrt(std::exp(log_h)) * eps;
    prev_l = std::log(y[t] * y[t]);
  }
  const UnivariateLogArchFit fit = fit_log_arch(y, 1);
  CHECK(std::abs(fit.coefficients[0] - gamma) < 0.05);
}

TEST_CASE("fit_log_arch finds no dependence in white noise") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd y(10000);
  for (int t = 0; t < y.size(); ++t) y[t] = normal(rng);
  const UnivariateLogArchFit fit = fit_log_arch(y, 1);
  CHECK(std::abs(fit.coefficients[0]) < 0.05);
}

TEST_CASE("fit_log_arch MSE shrinks with series length") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto simulate_and_fit = [&](int T) {
    const double gamma = 0.4, omega = -0.5;
    Eigen::VectorXd y(T);
    double prev_l = omega / (1.0 - gamma);
    for (int t = 0; t < T; ++t) {
      const double log_h = omega + gamma * prev_l;
      y[t] = std::sqrt(std::exp(log_h)) * normal(rng);
      prev_l = std::log(y[t] * y[t]);
    }
    const double err = fit_log_arch(y, 1).coefficients[0] - gamma;
    return err * err;
  };
  double mse_short = 0.0, mse_long = 0.0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    mse_short += simulate_and_fit(500);
    mse_long += simulate_and_fit(5000);
  }
  CHECK(mse_long < mse_short);
}

TEST_CASE("fit_log_arch rejects degenerate input") {
  Eigen::VectorXd constant = Eigen::VectorXd::Constant(50, 2.0);
  CHECK_THROWS_AS(fit_log_arch(constant, 1), ValidationError);
  Eigen::VectorXd tiny(5);
  tiny << 1, 2, 3, 4, 5;
  CHECK_THROWS_AS(fit_log_arch(tiny, 1), ValidationError);
}

TEST_CASE("fit_log_arch floors zeros per policy") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd y(200);
  for (int t = 0; t < y.size(); ++t) y[t] = normal(rng);
  y[50] = 0.0;
  y[120] = 0.0;
  const UnivariateLogArchFit fit = fit_log_arch(y, 1);
  CHECK(fit.zero_replacements == 2);
}

TEST_CASE("piccolo distance examples") {
  auto fit_with = [](std::vector<double> coef) {
    UnivariateLogArchFit f;
    f.order = int(coef.size());
    f.coefficients = Eigen::Map<Eigen::VectorXd>(coef.data(), long(coef.size()));
    return f;
  };
  CHECK(piccolo_distance(fit_with({0.5}), fit_with({0.5})) == 0.0);
  CHECK(piccolo_distance(fit_with({0.5}), fit_with({0.2})) ==
        doctest::Approx(0.3));
  CHECK(piccolo_distance(fit_with({0.3, 0.4}), fit_with({0.0, 0.0})) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(piccolo_distance(fit_with({0.5}), fit_with({0.1, 0.2})),
                  ValidationError);

  SUBCASE("metric properties on random fits") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      auto a = fit_with({u(rng), u(rng)});
      auto b = fit_with({u(rng), u(rng)});
      CHECK(piccolo_distance(a, b) == piccolo_distance(b, a));
      CHECK(piccolo_distance(a, b) >= 0.0);
      CHECK(piccolo_distance(a, a) == 0.0);
    }
  }
}

TEST_CASE("knn weights") {
  const int n = 6;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  DistanceMatrix d;
  d.values = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) d.values(i, j) = d.values(j, i) = u(rng);

  SUBCASE("k=1 gives one unit entry per row") {
    const WeightMatrix w = knn_weights(d, 1);
    for (int i = 0; i < n; ++i) {
      CHECK((w.values.row(i).array() != 0.0).count() == 1);
      CHECK(w.values.row(i).maxCoeff() == 1.0);
    }
  }
  SUBCASE("k=n-1 spreads uniformly") {
    const WeightMatrix w = knn_weights(d, n - 1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        CHECK(w.values(i, j) ==
              doctest::Approx(i == j ? 0.0 : 1.0 / double(n - 1)));
  }
  SUBCASE("rows sum to one, k nonzeros per row") {
    for (int k = 1; k < n; ++k) {
      const WeightMatrix w = knn_weights(d, k);
      CHECK(w.row_normalized);
      for (int i = 0; i < n; ++i) {
        CHECK(w.values.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((w.values.row(i).array() != 0.0).count() == k);
      }
      w.check();
    }
  }
  SUBCASE("k out of range") {
    CHECK_THROWS_AS(knn_weights(d, 0), ValidationError);
    CHECK_THROWS_AS(knn_weights(d, n), ValidationError);
  }
  SUBCASE("distance ties break toward the lower index") {
    DistanceMatrix tie;
    tie.values = Eigen::MatrixXd::Constant(4, 4, 1.0);
    tie.values.diagonal().setZero();
    const WeightMatrix w = knn_weights(tie, 2);
    // row 0 picks series 1 and 2, not 3
    CHECK(w.values(0, 1) == 0.5);
    CHECK(w.values(0, 2) == 0.5);
    CHECK(w.values(0, 3) == 0.0);
  }
}

TEST_CASE("rho validity interval brackets (-1, 1) for row-normalized grids") {
  const WeightMatrix w = row_normalize(build_queen_grid(3, 3));
  const auto [lo, hi] = rho_validity_interval(w);
  CHECK(lo <= -1.0);
  CHECK(hi == doctest::Approx(1.0));
}

TEST_SUITE_END();
