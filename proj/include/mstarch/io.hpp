#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mstarch/estimation.hpp"
#include "mstarch/filter.hpp"
#include "mstarch/model.hpp"
#include "mstarch/montecarlo.hpp"
#include "mstarch/weights.hpp"

namespace mstarch::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Doubles are written with 17 significant digits so that write-then-read
// reproduces values exactly.
std::string format_double(double v);

// Panel CSV: header row "time,<loc ids...>", one row per period.
void write_panel_csv(const fs::path& path, const Panel& panel);
Panel read_panel_csv(const fs::path& path);
void write_log_squared_csv(const fs::path& path, const LogSquaredPanel& panel);

void write_regime_path_csv(const fs::path& path, const RegimePath& path_states,
                           const std::vector<std::string>& time_ids);

// Headerless n x n CSV.
void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const fs::path& path);

// Weight CSV plus a "<path>.meta.json" sidecar recording row_normalized
// and the construction method.
void write_weight_matrix(const fs::path& path, const WeightMatrix& w,
                         const std::string& method,
                         const json& extra = json::object());
WeightMatrix read_weight_matrix(const fs::path& path);

json estimation_to_json(const EstimationResult& result,
                        const FitOptions& options);
void write_estimation_json(const fs::path& path,
                           const EstimationResult& result,
                           const FitOptions& options);
EstimationResult read_estimation_json(const fs::path& path);

// (time, xi1_filtered, xi2_filtered, xi1_smoothed, xi2_smoothed) rows.
void write_probabilities_csv(const fs::path& path, const FilterOutput& filter,
                             const SmoothedPath& smoothed,
                             const std::vector<std::string>& time_ids);

ModelParams model_params_from_json(const json& j);
json model_params_to_json(const ModelParams& m);

StudyConfig study_config_from_json(const json& j);
json study_config_to_json(const StudyConfig& config);

// Wide: parameter rows, one "mean(rmse)" column per (n, T) cell.
void write_study_wide_csv(const fs::path& path, const StudyReport& report);
// Tidy: one row per parameter x cell.
void write_study_tidy_csv(const fs::path& path, const StudyReport& report);
void write_study_records_csv(const fs::path& path, const StudyReport& report);

json read_json_file(const fs::path& path);
void write_json_file(const fs::path& path, const json& j);

}  // namespace mstarch::io
