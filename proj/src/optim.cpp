#include "mstarch/optim.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mstarch::optim {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

Result nelder_mead(const Objective& f, const Eigen::VectorXd& x0, double tol,
                   int max_iter, double initial_step) {
  const int dim = int(x0.size());
  Result res;
  res.x = x0;

  struct Vertex {
    Eigen::VectorXd x;
    double f;
  };
  std::vector<Vertex> simplex;
  simplex.reserve(dim + 1);
  simplex.push_back({x0, f(x0)});
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd xi = x0;
    xi[i] += initial_step;
    simplex.push_back({xi, f(xi)});
  }
  res.evaluations = dim + 1;

  auto by_f = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
  std::sort(simplex.begin(), simplex.end(), by_f);

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    const double f_best = simplex.front().f;
    const double f_worst = simplex.back().f;
    if (std::isfinite(f_best) &&
        f_worst - f_best <= tol * (std::abs(f_best) + 1.0)) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < dim; ++i) centroid += simplex[i].x;
    centroid /= double(dim);

    const Vertex& worst = simplex.back();
    Eigen::VectorXd xr = centroid + (centroid - worst.x);
    double fr = f(xr);
    ++res.evaluations;

    if (fr < simplex.front().f) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - worst.x);
      double fe = f(xe);
      ++res.evaluations;
      simplex.back() = (fe < fr) ? Vertex{xe, fe} : Vertex{xr, fr};
    } else if (fr < simplex[dim - 1].f) {
      simplex.back() = {xr, fr};
    } else {
      const bool outside = fr < worst.f;
      Eigen::VectorXd xc;
      if (outside)
        xc = centroid + 0.5 * (xr - centroid);
      else
        xc = centroid - 0.5 * (centroid - worst.x);
      double fc = f(xc);
      ++res.evaluations;
      if (fc < std::min(fr, worst.f)) {
        simplex.back() = {xc, fc};
      } else {
        // shrink toward the best vertex
        for (int i = 1; i <= dim; ++i) {
          simplex[i].x = simplex[0].x + 0.5 * (simplex[i].x - simplex[0].x);
          simplex[i].f = f(simplex[i].x);
        }
        res.evaluations += dim;
      }
    }
    std::sort(simplex.begin(), simplex.end(), by_f);
  }

  res.x = simplex.front().x;
  res.f = simplex.front().f;
  return res;
}

Eigen::VectorXd gradient_central(const Objective& f, const Eigen::VectorXd& x,
                                 double h_scale) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = h_scale * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Result bfgs(const Objective& f, const Eigen::VectorXd& x0, double tol,
            int max_iter) {
  const int dim = int(x0.size());
  Result res;
  res.x = x0;
  res.f = f(x0);
  res.evaluations = 1;
  if (!std::isfinite(res.f)) return res;

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd g = gradient_central(f, res.x);
  res.evaluations += 2 * dim;

  int small_steps = 0;  // consecutive sub-tolerance improvements
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    if (g.lpNorm<Eigen::Infinity>() <= 1e-6 * (std::abs(res.f) + 1.0)) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -(h_inv * g);
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {  // reset on a non-descent direction
      h_inv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
      if (!(slope < 0.0)) break;
    }

    // Armijo backtracking
    double step = 1.0;
    double f_new = kNan;
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = res.x + step * dir;
      f_new = f(x_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd g_new = gradient_central(f, x_new);
    res.evaluations += 2 * dim;
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
      h_inv = (eye - rho * s * yv.transpose()) * h_inv *
                  (eye - rho * yv * s.transpose()) +
              rho * s * s.transpose();
    }

    const double improvement = res.f - f_new;
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    small_steps = (improvement <= tol * (std::abs(res.f) + 1.0))
                      ? small_steps + 1
                      : 0;
    if (small_steps >= 2) {
      res.converged = true;
      break;
    }
  }
  return res;
}

Eigen::MatrixXd hessian_central(const Objective& f, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& steps) {
  const Eigen::Index dim = x.size();
  Eigen::MatrixXd h(dim, dim);
  const double f0 = f(x);
  Eigen::VectorXd xt = x;

  for (Eigen::Index i = 0; i < dim; ++i) {
    const double hi = steps[i];
    xt[i] = x[i] + hi;
    const double fp = f(xt);
    xt[i] = x[i] - hi;
    const double fm = f(xt);
    xt[i] = x[i];
    h(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
  }
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      const double hi = steps[i], hj = steps[j];
      xt[i] = x[i] + hi; xt[j] = x[j] + hj;
      const double fpp = f(xt);
      xt[j] = x[j] - hj;
      const double fpm = f(xt);
      xt[i] = x[i] - hi; xt[j] = x[j] + hj;
      const double fmp = f(xt);
      xt[j] = x[j] - hj;
      const double fmm = f(xt);
      xt[i] = x[i]; xt[j] = x[j];
      h(i, j) = h(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
    }
  }
  return h;
}

std::pair<Eigen::VectorXd, bool> std_errors_from_hessian(
    const Eigen::MatrixXd& hessian) {
  const Eigen::Index dim = hessian.rows();
  Eigen::VectorXd se = Eigen::VectorXd::Constant(dim, kNan);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    return {se, false};

  const Eigen::MatrixXd inv = hessian.inverse();
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (inv(i, i) < 0.0) return {se, false};
    se[i] = std::sqrt(inv(i, i));
  }
  return {se, true};
}

}  // namespace mstarch::optim
