#include "mstarch/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace mstarch::io {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const fs::path& path, long line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || end != begin + s.size())
    throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                          ": cannot parse number '" + s + "'");
  return v;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file: " + path.string());
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

const json& require_field(const json& j, const std::string& key,
                          const std::string& where) {
  if (!j.contains(key))
    throw ValidationError(where + ": missing field '" + key + "'");
  return j.at(key);
}

double num_field(const json& j, const std::string& key,
                 const std::string& where) {
  const json& v = require_field(j, key, where);
  if (!v.is_number())
    throw ValidationError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

double num_or(const json& j, const std::string& key, double fallback,
              const std::string& where) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number())
    throw ValidationError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

double json_to_double(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                     : v.get<double>();
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_panel_csv(const fs::path& path, const Panel& panel) {
  panel.check();
  std::ofstream out = open_output(path);
  out << "time";
  for (Eigen::Index i = 0; i < panel.n(); ++i) {
    out << ',';
    out << (panel.location_ids.empty() ? "loc" + std::to_string(i + 1)
                                       : panel.location_ids[i]);
  }
  out << '\n';
  for (Eigen::Index t = 0; t < panel.T(); ++t) {
    out << (panel.time_ids.empty() ? std::to_string(t + 1)
                                   : panel.time_ids[t]);
    for (Eigen::Index i = 0; i < panel.n(); ++i)
      out << ',' << format_double(panel.values(i, t));
    out << '\n';
  }
}

void write_log_squared_csv(const fs::path& path,
                           const LogSquaredPanel& panel) {
  Panel p;
  p.values = panel.values;
  p.location_ids = panel.location_ids;
  p.time_ids = panel.time_ids;
  write_panel_csv(path, p);
}

Panel read_panel_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.size() < 2)
    throw ValidationError(path.string() + ": panel CSV needs a header and at "
                                          "least one data row");
  const auto header = split_csv_line(lines[0]);
  if (header.size() < 2)
    throw ValidationError(path.string() + ": panel CSV needs a time column "
                                          "and at least one location column");
  Panel panel;
  const Eigen::Index n = Eigen::Index(header.size()) - 1;
  const Eigen::Index T = Eigen::Index(lines.size()) - 1;
  panel.location_ids.assign(header.begin() + 1, header.end());
  panel.values.resize(n, T);
  panel.time_ids.reserve(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto fields = split_csv_line(lines[t + 1]);
    if (Eigen::Index(fields.size()) != n + 1)
      throw ValidationError(path.string() + ":" + std::to_string(t + 2) +
                            ": expected " + std::to_string(n + 1) +
                            " fields, got " + std::to_string(fields.size()));
    panel.time_ids.push_back(fields[0]);
    for (Eigen::Index i = 0; i < n; ++i)
      panel.values(i, t) = parse_double(fields[i + 1], path, t + 2);
  }
  try {
    panel.check();
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return panel;
}

void write_regime_path_csv(const fs::path& path, const RegimePath& path_states,
                           const std::vector<std::string>& time_ids) {
  std::ofstream out = open_output(path);
  out << "time,state\n";
  for (std::size_t t = 0; t < path_states.states.size(); ++t) {
    out << (t < time_ids.size() ? time_ids[t] : std::to_string(t + 1)) << ','
        << path_states.states[t] << '\n';
  }
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out = open_output(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ValidationError(path.string() + ": empty matrix");
  const Eigen::Index rows = Eigen::Index(lines.size());
  const Eigen::Index cols = Eigen::Index(split_csv_line(lines[0]).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto fields = split_csv_line(lines[i]);
    if (Eigen::Index(fields.size()) != cols)
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) +
                            ": ragged row");
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = parse_double(fields[j], path, i + 1);
  }
  return m;
}

void write_weight_matrix(const fs::path& path, const WeightMatrix& w,
                         const std::string& method, const json& extra) {
  w.check();
  write_matrix_csv(path, w.values);
  json meta = extra;
  meta["n"] = w.n();
  meta["row_normalized"] = w.row_normalized;
  meta["method"] = method;
  write_json_file(fs::path(path.string() + ".meta.json"), meta);
}

WeightMatrix read_weight_matrix(const fs::path& path) {
  WeightMatrix w;
  w.values = read_matrix_csv(path);
  if (w.values.rows() != w.values.cols())
    throw ValidationError(path.string() + ": weight matrix must be square");
  const fs::path meta_path(path.string() + ".meta.json");
  if (fs::exists(meta_path)) {
    const json meta = read_json_file(meta_path);
    w.row_normalized = meta.value("row_normalized", false);
  } else {
    // no sidecar: infer from the row sums
    w.row_normalized = true;
    for (Eigen::Index i = 0; i < w.n() && w.row_normalized; ++i) {
      const double s = w.values.row(i).sum();
      if (s != 0.0 && std::abs(s - 1.0) > 1e-9) w.row_normalized = false;
    }
  }
  w.check();
  return w;
}

json model_params_to_json(const ModelParams& m) {
  auto regime = [](const RegimeParams& r) {
    return json{{"rho", r.rho},
                {"gamma", r.gamma},
                {"delta", r.delta},
                {"phi", r.phi},
                {"mu", r.mu0()}};
  };
  return json{{"regime1", regime(m.regimes[0])},
              {"regime2", regime(m.regimes[1])},
              {"p", m.transition.p},
              {"q", m.transition.q},
              {"sigma2", m.sigma2}};
}

ModelParams model_params_from_json(const json& j) {
  auto regime = [&](const std::string& key) {
    const json& r = require_field(j, key, "params");
    const bool has_mu = r.contains("mu");
    const bool has_phi = r.contains("phi");
    RegimeParams out;
    out.rho = num_field(r, "rho", "params." + key);
    out.gamma = num_field(r, "gamma", "params." + key);
    out.delta = num_field(r, "delta", "params." + key);
    if (has_phi) {
      out.phi = num_field(r, "phi", "params." + key);
      if (has_mu) {
        const double mu = num_field(r, "mu", "params." + key);
        if (std::abs(mu + constants::mu_eps - out.phi) > 1e-9)
          throw ValidationError("params." + key +
                                ": 'mu' and 'phi' disagree (phi = mu + "
                                "E[log chi^2_1])");
      }
    } else if (has_mu) {
      out.phi = num_field(r, "mu", "params." + key) + constants::mu_eps;
    } else {
      throw ValidationError("params." + key + ": missing 'mu' or 'phi'");
    }
    return out;
  };
  ModelParams m;
  m.regimes[0] = regime("regime1");
  m.regimes[1] = regime("regime2");
  m.transition.p = num_field(j, "p", "params");
  m.transition.q = num_field(j, "q", "params");
  m.sigma2 = num_or(j, "sigma2", constants::log_chi2_var, "params");
  return m;
}

json estimation_to_json(const EstimationResult& result,
                        const FitOptions& options) {
  json j;
  j["model"] = result.n_regimes == 2 ? "two-regime" : "one-regime";
  j["params"] = model_params_to_json(result.params);
  j["loglik"] = result.loglik;
  j["bic"] = result.bic;
  j["n_params"] = result.n_params;
  j["n_obs"] = result.n_obs;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  j["start_points_tried"] = result.start_points_tried;
  j["se_reliable"] = result.se_reliable;
  const std::vector<std::string> order =
      result.n_regimes == 2
          ? std::vector<std::string>{"rho1", "gamma1", "delta1", "phi1",
                                     "rho2", "gamma2", "delta2", "phi2", "p",
                                     "q", "sigma2"}
          : std::vector<std::string>{"rho", "gamma", "delta", "phi", "sigma2"};
  j["parameter_order"] = order;
  j["std_errors"] = json::array();
  j["p_values"] = json::array();
  for (Eigen::Index i = 0; i < result.std_errors.size(); ++i) {
    j["std_errors"].push_back(result.std_errors[i]);
    j["p_values"].push_back(result.p_values[i]);
  }
  j["options"] = {{"n_starts", options.n_starts},
                  {"seed", options.seed},
                  {"tol", options.tol},
                  {"max_iterations", options.max_iterations}};
  return j;
}

void write_estimation_json(const fs::path& path,
                           const EstimationResult& result,
                           const FitOptions& options) {
  write_json_file(path, estimation_to_json(result, options));
}

EstimationResult read_estimation_json(const fs::path& path) {
  const json j = read_json_file(path);
  EstimationResult res;
  const std::string model =
      require_field(j, "model", path.string()).get<std::string>();
  if (model == "two-regime")
    res.n_regimes = 2;
  else if (model == "one-regime")
    res.n_regimes = 1;
  else
    throw ValidationError(path.string() + ": unknown model '" + model + "'");
  res.params = model_params_from_json(require_field(j, "params", path.string()));
  res.loglik = num_field(j, "loglik", path.string());
  res.bic = num_field(j, "bic", path.string());
  res.n_params = int(num_field(j, "n_params", path.string()));
  res.n_obs = long(num_field(j, "n_obs", path.string()));
  res.converged = require_field(j, "converged", path.string()).get<bool>();
  res.iterations = int(num_or(j, "iterations", 0, path.string()));
  res.start_points_tried =
      int(num_or(j, "start_points_tried", 0, path.string()));
  res.se_reliable = j.value("se_reliable", false);
  const int k = res.n_regimes == 2 ? 11 : 5;
  res.std_errors = Eigen::VectorXd::Constant(
      k, std::numeric_limits<double>::quiet_NaN());
  res.p_values = res.std_errors;
  if (j.contains("std_errors"))
    for (int i = 0; i < k && i < int(j["std_errors"].size()); ++i)
      res.std_errors[i] = json_to_double(j["std_errors"][i]);
  if (j.contains("p_values"))
    for (int i = 0; i < k && i < int(j["p_values"].size()); ++i)
      res.p_values[i] = json_to_double(j["p_values"][i]);
  return res;
}

void write_probabilities_csv(const fs::path& path, const FilterOutput& filter,
                             const SmoothedPath& smoothed,
                             const std::vector<std::string>& time_ids) {
  const Eigen::Index T = filter.filtered.rows();
  if (smoothed.smoothed.rows() != T)
    throw ValidationError("filter and smoother lengths differ");
  std::ofstream out = open_output(path);
  out << "time,xi1_filtered,xi2_filtered,xi1_smoothed,xi2_smoothed\n";
  for (Eigen::Index t = 0; t < T; ++t) {
    out << (std::size_t(t) < time_ids.size() ? time_ids[t]
                                             : std::to_string(t + 1));
    out << ',' << format_double(filter.filtered(t, 0)) << ','
        << format_double(filter.filtered(t, 1)) << ','
        << format_double(smoothed.smoothed(t, 0)) << ','
        << format_double(smoothed.smoothed(t, 1)) << '\n';
  }
}

StudyConfig study_config_from_json(const json& j) {
  StudyConfig cfg;
  cfg.true_params.regimes[0] = RegimeParams::from_mu(0.2, 0.2, -0.2, 0.1);
  cfg.true_params.regimes[1] = RegimeParams::from_mu(0.2, 0.8, -0.2, 0.1);
  cfg.true_params.transition = {0.97, 0.93};
  cfg.true_params.sigma2 = constants::log_chi2_var;

  if (j.contains("grids")) {
    if (!j["grids"].is_array() || j["grids"].empty())
      throw ValidationError("study config: 'grids' must be a non-empty array");
    cfg.grid_dims.clear();
    for (const auto& g : j["grids"]) {
      if (!g.is_array() || g.size() != 2 || !g[0].is_number_integer() ||
          !g[1].is_number_integer())
        throw ValidationError(
            "study config: each grid must be an integer pair [rows, cols]");
      cfg.grid_dims.emplace_back(g[0].get<long>(), g[1].get<long>());
    }
  }
  if (j.contains("horizons")) {
    if (!j["horizons"].is_array() || j["horizons"].empty())
      throw ValidationError(
          "study config: 'horizons' must be a non-empty array");
    cfg.horizons.clear();
    for (const auto& h : j["horizons"]) {
      if (!h.is_number_integer())
        throw ValidationError("study config: horizons must be integers");
      cfg.horizons.push_back(h.get<long>());
    }
  }
  cfg.replications = int(num_or(j, "replications", cfg.replications,
                                "study config"));
  cfg.burn_in = long(num_or(j, "burn_in", double(cfg.burn_in), "study config"));
  if (j.contains("master_seed")) {
    if (!j["master_seed"].is_number_integer())
      throw ValidationError("study config: 'master_seed' must be an integer");
    cfg.master_seed = j["master_seed"].get<std::uint64_t>();
  }
  cfg.workers = int(num_or(j, "workers", double(cfg.workers), "study config"));
  if (j.contains("true_params"))
    cfg.true_params = model_params_from_json(j["true_params"]);
  if (j.contains("fit")) {
    const json& f = j["fit"];
    cfg.fit_options.n_starts =
        int(num_or(f, "n_starts", cfg.fit_options.n_starts, "study config.fit"));
    if (f.contains("seed"))
      cfg.fit_options.seed = f["seed"].get<std::uint64_t>();
    cfg.fit_options.tol = num_or(f, "tol", cfg.fit_options.tol,
                                 "study config.fit");
    cfg.fit_options.max_iterations =
        int(num_or(f, "max_iterations", cfg.fit_options.max_iterations,
                   "study config.fit"));
  }
  cfg.check();
  return cfg;
}

json study_config_to_json(const StudyConfig& config) {
  json j;
  j["grids"] = json::array();
  for (const auto& [r, c] : config.grid_dims) j["grids"].push_back({r, c});
  j["horizons"] = config.horizons;
  j["replications"] = config.replications;
  j["burn_in"] = config.burn_in;
  j["master_seed"] = config.master_seed;
  j["workers"] = config.workers;
  j["true_params"] = model_params_to_json(config.true_params);
  j["fit"] = {{"n_starts", config.fit_options.n_starts},
              {"seed", config.fit_options.seed},
              {"tol", config.fit_options.tol},
              {"max_iterations", config.fit_options.max_iterations}};
  return j;
}

namespace {
std::string cell_label(const StudyCell& c) {
  return "n=" + std::to_string(c.n()) + " T=" + std::to_string(c.horizon);
}

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}
}  // namespace

void write_study_wide_csv(const fs::path& path, const StudyReport& report) {
  std::ofstream out = open_output(path);
  out << "parameter,truth";
  for (const auto& c : report.cells) out << ',' << cell_label(c);
  out << '\n';
  for (std::size_t k = 0; k < report.parameter_names.size(); ++k) {
    out << report.parameter_names[k] << ',' << format_double(report.truths[k]);
    for (std::size_t c = 0; c < report.cells.size(); ++c) {
      const CellParamStats& st = report.stats[c][k];
      out << ',';
      if (st.count > 0)
        out << fmt3(st.mean) << '(' << fmt3(st.rmse) << ')';
      else
        out << '-';
    }
    out << '\n';
  }
}

void write_study_tidy_csv(const fs::path& path, const StudyReport& report) {
  std::ofstream out = open_output(path);
  out << "parameter,rows,cols,n,T,truth,mean,rmse,converged,failures\n";
  for (std::size_t c = 0; c < report.cells.size(); ++c) {
    const StudyCell& cell = report.cells[c];
    for (std::size_t k = 0; k < report.parameter_names.size(); ++k) {
      const CellParamStats& st = report.stats[c][k];
      out << report.parameter_names[k] << ',' << cell.rows << ',' << cell.cols
          << ',' << cell.n() << ',' << cell.horizon << ','
          << format_double(report.truths[k]) << ',';
      if (st.count > 0)
        out << format_double(st.mean) << ',' << format_double(st.rmse);
      else
        out << ',';
      out << ',' << st.count << ',' << st.failures << '\n';
    }
  }
}

void write_study_records_csv(const fs::path& path, const StudyReport& report) {
  std::ofstream out = open_output(path);
  out << "cell_index,rows,cols,n,T,replication,seed,converged,loglik,bic";
  for (const auto& name : kStudyParameterNames) out << ',' << name;
  out << '\n';
  for (const auto& rec : report.records) {
    const StudyCell& cell = report.cells[rec.cell_index];
    out << rec.cell_index << ',' << cell.rows << ',' << cell.cols << ','
        << cell.n() << ',' << cell.horizon << ',' << rec.replication << ','
        << rec.seed << ',' << (rec.converged ? 1 : 0);
    if (rec.converged) {
      out << ',' << format_double(rec.loglik) << ',' << format_double(rec.bic);
      for (double v : study_parameter_values(rec.aligned))
        out << ',' << format_double(v);
    } else {
      out << ",,";
      for (std::size_t k = 0; k < kStudyParameterNames.size(); ++k) out << ',';
    }
    out << '\n';
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
}

}  // namespace mstarch::io
