#include "mstarch/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace mstarch {

const std::vector<std::string> kStudyParameterNames = {
    "rho1", "gamma1", "delta1", "mu1", "p",    "rho2", "gamma2",
    "delta2", "mu2",  "q",      "sigma2", "phi1", "phi2"};

std::vector<double> study_parameter_values(const ModelParams& m) {
  return {m.regimes[0].rho,   m.regimes[0].gamma, m.regimes[0].delta,
          m.regimes[0].mu0(), m.transition.p,     m.regimes[1].rho,
          m.regimes[1].gamma, m.regimes[1].delta, m.regimes[1].mu0(),
          m.transition.q,     m.sigma2,           m.regimes[0].phi,
          m.regimes[1].phi};
}

void StudyConfig::check() const {
  if (grid_dims.empty()) throw ValidationError("study config: no grid_dims");
  for (const auto& [r, c] : grid_dims)
    if (r < 1 || c < 1)
      throw ValidationError("study config: grid dims must be >= 1");
  if (horizons.empty()) throw ValidationError("study config: no horizons");
  for (long t : horizons)
    if (t < 2) throw ValidationError("study config: horizons must be >= 2");
  if (replications < 1)
    throw ValidationError("study config: replications must be >= 1");
  if (burn_in < 0)
    throw ValidationError("study config: burn_in must be non-negative");
  if (workers < 0)
    throw ValidationError("study config: workers must be non-negative");
  true_params.check();
}

ModelParams align_regimes(const ModelParams& estimate,
                          const ModelParams& truth) {
  auto sse = [&](const ModelParams& e) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i) {
      const RegimeParams& a = e.regimes[i];
      const RegimeParams& b = truth.regimes[i];
      s += (a.rho - b.rho) * (a.rho - b.rho) +
           (a.gamma - b.gamma) * (a.gamma - b.gamma) +
           (a.delta - b.delta) * (a.delta - b.delta) +
           (a.phi - b.phi) * (a.phi - b.phi);
    }
    return s;
  };
  const ModelParams swapped = estimate.swapped();
  return sse(swapped) < sse(estimate) ? swapped : estimate;
}

StudyReport run_study(const StudyConfig& config) {
  config.check();

  StudyReport report;
  for (const auto& [rows, cols] : config.grid_dims)
    for (long horizon : config.horizons)
      report.cells.push_back({rows, cols, horizon});
  report.parameter_names = kStudyParameterNames;
  report.truths = study_parameter_values(config.true_params);

  std::vector<WeightMatrix> cell_weights;
  cell_weights.reserve(report.cells.size());
  for (const auto& cell : report.cells)
    cell_weights.push_back(row_normalize(build_queen_grid(cell.rows, cell.cols)));

  const int reps = config.replications;
  const std::size_t n_jobs = report.cells.size() * std::size_t(reps);
  report.records.assign(n_jobs, ReplicationRecord{});

  auto run_job = [&](std::size_t job) {
    const int cell_index = int(job / std::size_t(reps));
    const int rep = int(job % std::size_t(reps));
    const StudyCell& cell = report.cells[cell_index];
    const WeightMatrix& w = cell_weights[cell_index];

    ReplicationRecord rec;
    rec.cell_index = cell_index;
    rec.replication = rep;
    rec.seed = derive_seed(config.master_seed, std::uint64_t(cell_index),
                           std::uint64_t(rep));

    SimulationResult sim = simulate(config.true_params, w, cell.horizon,
                                    config.burn_in, rec.seed);
    FitOptions fit_opt = config.fit_options;
    fit_opt.seed = derive_seed(rec.seed, 0x5eedull);
    fit_opt.compute_std_errors = false;  // the report has no use for them
    try {
      EstimationResult res = fit_two_regime(sim.log_squared, w, fit_opt);
      rec.converged = res.converged;
      rec.loglik = res.loglik;
      rec.bic = res.bic;
      rec.aligned = align_regimes(res.params, config.true_params);
    } catch (const std::exception&) {
      rec.converged = false;
    }
    report.records[job] = rec;
  };

  int workers = config.workers;
  if (workers == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    workers = hw > 0 ? int(hw) : 1;
  }
  workers = std::min<int>(workers, int(n_jobs));

  if (workers <= 1) {
    for (std::size_t job = 0; job < n_jobs; ++job) run_job(job);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t job = next.fetch_add(1); job < n_jobs;
             job = next.fetch_add(1))
          run_job(job);
      });
    for (auto& th : pool) th.join();
  }

  // deterministic reduction in (cell, replication) order
  const std::size_t n_params = report.parameter_names.size();
  report.stats.assign(report.cells.size(),
                      std::vector<CellParamStats>(n_params));
  for (std::size_t c = 0; c < report.cells.size(); ++c) {
    for (std::size_t k = 0; k < n_params; ++k) {
      double sum = 0.0, sq = 0.0;
      int count = 0, failures = 0;
      for (int r = 0; r < reps; ++r) {
        const ReplicationRecord& rec =
            report.records[c * std::size_t(reps) + std::size_t(r)];
        if (!rec.converged) {
          ++failures;
          continue;
        }
        const double v = study_parameter_values(rec.aligned)[k];
        sum += v;
        const double d = v - report.truths[k];
        sq += d * d;
        ++count;
      }
      CellParamStats& st = report.stats[c][k];
      st.count = count;
      st.failures = failures;
      if (count > 0) {
        st.mean = sum / double(count);
        st.rmse = std::sqrt(sq / double(count));
      } else {
        st.mean = std::numeric_limits<double>::quiet_NaN();
        st.rmse = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return report;
}

}  // namespace mstarch
