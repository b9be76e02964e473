#include "mstarch/cli.hpp"

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "mstarch/io.hpp"

namespace mstarch {

namespace {

namespace fs = std::filesystem;
using io::json;

void ensure_writable(const fs::path& path, bool force) {
  if (fs::exists(path) && !force)
    throw ValidationError("output file exists: " + path.string() +
                          " (use --force to overwrite)");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

WeightMatrix load_weights_normalized(const fs::path& path) {
  WeightMatrix w = io::read_weight_matrix(path);
  if (!w.row_normalized) {
    std::vector<Eigen::Index> zero_rows;
    w = row_normalize(w, &zero_rows);
    std::cerr << "note: row-normalized weight matrix from " << path;
    if (!zero_rows.empty())
      std::cerr << " (" << zero_rows.size() << " zero rows left untouched)";
    std::cerr << "\n";
  }
  return w;
}

Panel prices_to_log_returns(const Panel& prices) {
  prices.check();
  if (prices.T() < 2)
    throw ValidationError("need at least two price observations per series");
  Panel out;
  out.location_ids = prices.location_ids;
  out.values.resize(prices.n(), prices.T() - 1);
  for (Eigen::Index i = 0; i < prices.n(); ++i)
    for (Eigen::Index t = 1; t < prices.T(); ++t) {
      const double p0 = prices.values(i, t - 1);
      const double p1 = prices.values(i, t);
      if (!(p0 > 0.0) || !(p1 > 0.0))
        throw ValidationError(
            "prices must be positive to take log-returns (series " +
            (prices.location_ids.empty() ? std::to_string(i + 1)
                                         : prices.location_ids[i]) +
            ")");
      out.values(i, t - 1) = std::log(p1 / p0);
    }
  if (!prices.time_ids.empty())
    out.time_ids.assign(prices.time_ids.begin() + 1, prices.time_ids.end());
  return out;
}

struct CommonArgs {
  std::string out_dir = ".";
  bool force = false;
  std::string config_path;

  json config() const {
    return config_path.empty() ? json::object()
                               : io::read_json_file(config_path);
  }
  fs::path out(const std::string& name) const {
    return fs::path(out_dir) / name;
  }
};

void add_common(CLI::App* sub, CommonArgs& c) {
  sub->add_option("--out-dir", c.out_dir, "Output directory");
  sub->add_flag("--force", c.force, "Overwrite existing output files");
  sub->add_option("--config", c.config_path, "JSON config file");
}

ZeroPolicy zero_policy_from(const json& cfg, double scale_flag) {
  ZeroPolicy zp;
  if (cfg.contains("zero_policy")) {
    const json& z = cfg["zero_policy"];
    const std::string mode = z.value("mode", "scaled_floor");
    if (mode == "scaled_floor")
      zp.mode = ZeroPolicy::Mode::ScaledFloor;
    else if (mode == "absolute_floor")
      zp.mode = ZeroPolicy::Mode::AbsoluteFloor;
    else
      throw ValidationError("zero_policy.mode must be 'scaled_floor' or "
                            "'absolute_floor'");
    zp.scale = z.value("scale", zp.scale);
    zp.absolute = z.value("absolute", zp.absolute);
  }
  if (scale_flag > 0.0) zp.scale = scale_flag;
  return zp;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  CommonArgs common;
  long rows = 0, cols = 0;
  std::string weights_path;
  long T = 0;
  long burn_in = 100;
  std::uint64_t seed = 1;
  std::string params_path;
  // inline parameter flags; defaults are the simulation-study DGP
  double rho1 = 0.2, gamma1 = 0.2, delta1 = -0.2, mu1 = 0.1;
  double rho2 = 0.2, gamma2 = 0.8, delta2 = -0.2, mu2 = 0.1;
  double p = 0.97, q = 0.93;
  bool inline_given = false;
};

int cmd_simulate(const SimulateArgs& a) {
  ModelParams params;
  params.regimes[0] = RegimeParams::from_mu(a.rho1, a.gamma1, a.delta1, a.mu1);
  params.regimes[1] = RegimeParams::from_mu(a.rho2, a.gamma2, a.delta2, a.mu2);
  params.transition = {a.p, a.q};
  if (!a.params_path.empty()) {
    if (a.inline_given)
      throw ValidationError("give either --params or inline parameter flags");
    params = io::model_params_from_json(io::read_json_file(a.params_path));
  } else if (!a.common.config_path.empty()) {
    const json cfg = a.common.config();
    if (cfg.contains("params") && !a.inline_given)
      params = io::model_params_from_json(cfg["params"]);
  }

  WeightMatrix w;
  if (!a.weights_path.empty()) {
    w = load_weights_normalized(a.weights_path);
  } else {
    if (a.rows < 1 || a.cols < 1)
      throw ValidationError("give --rows/--cols for a queen grid or --weights");
    w = row_normalize(build_queen_grid(a.rows, a.cols));
  }

  const auto panel_path = a.common.out("panel.csv");
  const auto lsq_path = a.common.out("log_squared_panel.csv");
  const auto path_path = a.common.out("regime_path.csv");
  for (const auto& pth : {panel_path, lsq_path, path_path})
    ensure_writable(pth, a.common.force);

  const SimulationResult sim = simulate(params, w, a.T, a.burn_in, a.seed);
  io::write_panel_csv(panel_path, sim.panel);
  io::write_log_squared_csv(lsq_path, sim.log_squared);
  io::write_regime_path_csv(path_path, sim.path, sim.panel.time_ids);

  std::cout << "simulated n=" << w.n() << " T=" << a.T << " seed=" << a.seed
            << " -> " << a.common.out_dir << "\n";
  return 0;
}

// ------------------------------------------------------------ build-weights

struct BuildWeightsArgs {
  CommonArgs common;
  std::string input_path;
  bool prices = false;
  int k = 0;
  int order = 1;
  bool write_distances = false;
  double zero_scale = 0.0;
};

int cmd_build_weights(const BuildWeightsArgs& a) {
  const json cfg = a.common.config();
  const ZeroPolicy zp = zero_policy_from(cfg, a.zero_scale);

  Panel panel = io::read_panel_csv(a.input_path);
  if (a.prices) panel = prices_to_log_returns(panel);

  std::vector<UnivariateLogArchFit> fits;
  fits.reserve(panel.n());
  for (Eigen::Index i = 0; i < panel.n(); ++i) {
    const std::string id = panel.location_ids.empty()
                               ? "series" + std::to_string(i + 1)
                               : panel.location_ids[i];
    const long zeros = (panel.values.row(i).array() == 0.0).count();
    if (zeros > 0)
      std::cerr << "note: zero policy floored " << zeros
                << " observations in series '" << id << "'\n";
    fits.push_back(fit_log_arch(panel.values.row(i), a.order, zp, id));
  }

  const DistanceMatrix dist = piccolo_distance_matrix(fits);
  const WeightMatrix w = knn_weights(dist, a.k);

  const auto w_path = a.common.out("weights.csv");
  ensure_writable(w_path, a.common.force);
  ensure_writable(fs::path(w_path.string() + ".meta.json"), a.common.force);
  io::write_weight_matrix(w_path, w, "knn-piccolo",
                          {{"k", a.k}, {"order", a.order}});
  if (a.write_distances) {
    const auto d_path = a.common.out("distances.csv");
    ensure_writable(d_path, a.common.force);
    io::write_matrix_csv(d_path, dist.values);
  }
  std::cout << "built " << w.n() << "x" << w.n() << " k-NN weights (k=" << a.k
            << ", order=" << a.order << ") -> " << w_path.string() << "\n";
  return 0;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
  CommonArgs common;
  std::string panel_path;
  std::string weights_path;
  std::string mode = "both";
  FitOptions options;  // flag values; *_set marks explicitly given flags
  bool starts_set = false, seed_set = false, tol_set = false,
       max_iter_set = false;
  bool no_se = false;
  double zero_scale = 0.0;
};

FitOptions fit_options_from(const json& cfg, FitOptions base) {
  if (!cfg.contains("fit")) return base;
  const json& f = cfg["fit"];
  base.n_starts = f.value("n_starts", base.n_starts);
  if (f.contains("seed")) base.seed = f["seed"].get<std::uint64_t>();
  base.tol = f.value("tol", base.tol);
  base.max_iterations = f.value("max_iterations", base.max_iterations);
  return base;
}

int cmd_fit(const FitArgs& a) {
  if (a.mode != "one-regime" && a.mode != "two-regime" && a.mode != "both")
    throw ValidationError("--mode must be one-regime, two-regime, or both");
  const json cfg = a.common.config();
  FitOptions opt = fit_options_from(cfg, FitOptions{});
  if (a.starts_set) opt.n_starts = a.options.n_starts;
  if (a.seed_set) opt.seed = a.options.seed;
  if (a.tol_set) opt.tol = a.options.tol;
  if (a.max_iter_set) opt.max_iterations = a.options.max_iterations;
  opt.compute_std_errors = !a.no_se;
  const ZeroPolicy zp = zero_policy_from(cfg, a.zero_scale);

  const Panel panel = io::read_panel_csv(a.panel_path);
  const WeightMatrix w = load_weights_normalized(a.weights_path);
  if (panel.n() != w.n())
    throw ValidationError("panel has " + std::to_string(panel.n()) +
                          " locations but weight matrix is " +
                          std::to_string(w.n()) + "x" + std::to_string(w.n()));
  const LogSquaredPanel lsp = log_square(panel, zp);
  if (lsp.zero_replacements > 0)
    std::cerr << "note: zero policy floored " << lsp.zero_replacements
              << " panel entries\n";

  std::optional<EstimationResult> two, one;
  if (a.mode == "two-regime" || a.mode == "both") {
    const auto path = a.common.out("fit_two_regime.json");
    ensure_writable(path, a.common.force);
    two = fit_two_regime(lsp, w, opt);
    io::write_estimation_json(path, *two, opt);
    std::cout << "two-regime: loglik=" << two->loglik << " bic=" << two->bic
              << (two->converged ? "" : " (not converged)") << "\n";
  }
  if (a.mode == "one-regime" || a.mode == "both") {
    const auto path = a.common.out("fit_one_regime.json");
    ensure_writable(path, a.common.force);
    one = fit_one_regime(lsp, w, opt);
    io::write_estimation_json(path, *one, opt);
    std::cout << "one-regime: loglik=" << one->loglik << " bic=" << one->bic
              << (one->converged ? "" : " (not converged)") << "\n";
  }
  if (two && one)
    std::cout << "BIC comparison: two-regime=" << two->bic
              << " one-regime=" << one->bic << " preferred="
              << (two->bic < one->bic ? "two-regime" : "one-regime") << "\n";
  return 0;
}

// ------------------------------------------------------------------ smooth

struct SmoothArgs {
  CommonArgs common;
  std::string panel_path;
  std::string weights_path;
  std::string estimate_path;
  double zero_scale = 0.0;
};

int cmd_smooth(const SmoothArgs& a) {
  const json cfg = a.common.config();
  const ZeroPolicy zp = zero_policy_from(cfg, a.zero_scale);

  const EstimationResult est = io::read_estimation_json(a.estimate_path);
  if (est.n_regimes != 2)
    throw ValidationError(
        "smoothed inference needs a two-regime estimate file");

  const Panel panel = io::read_panel_csv(a.panel_path);
  const WeightMatrix w = load_weights_normalized(a.weights_path);
  const LogSquaredPanel lsp = log_square(panel, zp);

  const auto init = stationary_dist(est.params.transition);
  const FilterOutput fo = hamilton_filter(lsp, est.params, w, init);
  const SmoothedPath sp = kim_smooth(fo, est.params.transition);

  const auto prob_path = a.common.out("smoothed_probabilities.csv");
  const auto path_path = a.common.out("smoothed_regime_path.csv");
  ensure_writable(prob_path, a.common.force);
  ensure_writable(path_path, a.common.force);
  io::write_probabilities_csv(prob_path, fo, sp, panel.time_ids);
  io::write_regime_path_csv(path_path, sp.most_likely, panel.time_ids);
  std::cout << "smoothed T=" << lsp.T() << " loglik=" << fo.loglik << " -> "
            << prob_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- mc-study

struct McStudyArgs {
  CommonArgs common;
  bool desk = false;
  int workers = -1;
  std::uint64_t master_seed = 0;
  bool seed_set = false;
};

int cmd_mc_study(const McStudyArgs& a) {
  StudyConfig cfg;
  if (!a.common.config_path.empty())
    cfg = io::study_config_from_json(a.common.config());
  if (a.desk) cfg.replications = 30;
  if (a.workers >= 0) cfg.workers = a.workers;
  if (a.seed_set) cfg.master_seed = a.master_seed;
  cfg.check();

  const auto wide_path = a.common.out("report_wide.csv");
  const auto tidy_path = a.common.out("report_tidy.csv");
  const auto rec_path = a.common.out("replication_records.csv");
  for (const auto& pth : {wide_path, tidy_path, rec_path})
    ensure_writable(pth, a.common.force);

  const StudyReport report = run_study(cfg);
  io::write_study_wide_csv(wide_path, report);
  io::write_study_tidy_csv(tidy_path, report);
  io::write_study_records_csv(rec_path, report);

  int failures = 0;
  for (const auto& rec : report.records)
    if (!rec.converged) ++failures;
  std::cout << "study complete: " << report.cells.size() << " cells x "
            << cfg.replications << " replications, " << failures
            << " failures -> " << a.common.out_dir << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Two-regime Markov-switching spatio-temporal log-ARCH toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "Simulate the two-regime process on a spatial grid");
  add_common(sim_cmd, sim.common);
  sim_cmd->add_option("--rows", sim.rows, "Queen grid rows");
  sim_cmd->add_option("--cols", sim.cols, "Queen grid cols");
  sim_cmd->add_option("--weights", sim.weights_path, "Weight matrix CSV");
  sim_cmd->add_option("--T", sim.T, "Number of periods")->required();
  sim_cmd->add_option("--burn-in", sim.burn_in, "Discarded initial periods");
  sim_cmd->add_option("--seed", sim.seed, "RNG seed");
  sim_cmd->add_option("--params", sim.params_path, "Model parameter JSON");
  auto inline_opt = [&](const char* name, double& slot, const char* help) {
    sim_cmd->add_option(name, slot, help)->each([&sim](const std::string&) {
      sim.inline_given = true;
    });
  };
  inline_opt("--rho1", sim.rho1, "Regime-1 spatial effect");
  inline_opt("--gamma1", sim.gamma1, "Regime-1 temporal effect");
  inline_opt("--delta1", sim.delta1, "Regime-1 spatio-temporal effect");
  inline_opt("--mu1", sim.mu1, "Regime-1 intercept (pre-centering)");
  inline_opt("--rho2", sim.rho2, "Regime-2 spatial effect");
  inline_opt("--gamma2", sim.gamma2, "Regime-2 temporal effect");
  inline_opt("--delta2", sim.delta2, "Regime-2 spatio-temporal effect");
  inline_opt("--mu2", sim.mu2, "Regime-2 intercept (pre-centering)");
  inline_opt("--p", sim.p, "Regime-1 stay probability");
  inline_opt("--q", sim.q, "Regime-2 stay probability");

  BuildWeightsArgs bw;
  CLI::App* bw_cmd = app.add_subcommand(
      "build-weights", "Model-based k-NN weights from Piccolo distances");
  add_common(bw_cmd, bw.common);
  bw_cmd->add_option("--input", bw.input_path, "Returns (or prices) panel CSV")
      ->required();
  bw_cmd->add_flag("--prices", bw.prices,
                   "Input is prices; convert to log-returns first");
  bw_cmd->add_option("--k", bw.k, "Number of nearest neighbours")->required();
  bw_cmd->add_option("--order", bw.order, "Univariate log-ARCH order");
  bw_cmd->add_flag("--write-distances", bw.write_distances,
                   "Also write the Piccolo distance matrix");
  bw_cmd->add_option("--zero-scale", bw.zero_scale,
                     "Zero-floor scale (times series sd)");

  FitArgs fit;
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "Fit one- and/or two-regime models by QMLE");
  add_common(fit_cmd, fit.common);
  fit_cmd->add_option("--panel", fit.panel_path, "Panel CSV")->required();
  fit_cmd->add_option("--weights", fit.weights_path, "Weight matrix CSV")
      ->required();
  fit_cmd->add_option("--mode", fit.mode, "one-regime | two-regime | both");
  fit_cmd->add_option("--starts", fit.options.n_starts, "Start points")
      ->each([&fit](const std::string&) { fit.starts_set = true; });
  fit_cmd->add_option("--seed", fit.options.seed, "Start-jitter seed")
      ->each([&fit](const std::string&) { fit.seed_set = true; });
  fit_cmd->add_option("--tol", fit.options.tol, "Convergence tolerance")
      ->each([&fit](const std::string&) { fit.tol_set = true; });
  fit_cmd->add_option("--max-iter", fit.options.max_iterations,
                      "Iteration cap per optimizer stage")
      ->each([&fit](const std::string&) { fit.max_iter_set = true; });
  fit_cmd->add_flag("--no-se", fit.no_se, "Skip standard errors");
  fit_cmd->add_option("--zero-scale", fit.zero_scale,
                      "Zero-floor scale (times series sd)");

  SmoothArgs smooth;
  CLI::App* smooth_cmd = app.add_subcommand(
      "smooth", "Filtered and smoothed regime probabilities");
  add_common(smooth_cmd, smooth.common);
  smooth_cmd->add_option("--panel", smooth.panel_path, "Panel CSV")
      ->required();
  smooth_cmd->add_option("--weights", smooth.weights_path, "Weight matrix CSV")
      ->required();
  smooth_cmd->add_option("--estimate", smooth.estimate_path,
                         "Two-regime estimate JSON")
      ->required();
  smooth_cmd->add_option("--zero-scale", smooth.zero_scale,
                         "Zero-floor scale (times series sd)");

  McStudyArgs mc;
  CLI::App* mc_cmd = app.add_subcommand(
      "mc-study", "Monte Carlo replication study over an (n, T) grid");
  add_common(mc_cmd, mc.common);
  mc_cmd->add_flag("--desk", mc.desk, "Desk-scale preset: 30 replications");
  mc_cmd->add_option("--workers", mc.workers,
                     "Concurrent replications (0 = hardware)");
  mc_cmd->add_option("--seed", mc.master_seed, "Master seed override")
      ->each([&mc](const std::string&) { mc.seed_set = true; });

  std::vector<const char*> argv;
  argv.push_back("mstarch");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(sim_cmd)) return cmd_simulate(sim);
    if (app.got_subcommand(bw_cmd)) return cmd_build_weights(bw);
    if (app.got_subcommand(fit_cmd)) return cmd_fit(fit);
    if (app.got_subcommand(smooth_cmd)) return cmd_smooth(smooth);
    if (app.got_subcommand(mc_cmd)) return cmd_mc_study(mc);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace mstarch
