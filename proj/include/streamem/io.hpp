#pragma once

#include <string>
#include <vector>

#include "streamem/experiment.hpp"
#include "streamem/model.hpp"

namespace streamem {

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double x);

void write_dataset_csv(const std::string& path, const Matrix& data,
                       const std::vector<std::string>& columns);

// Reads a numeric CSV, skipping one header line when the first line does not
// parse as numbers. expected_cols >= 0 enforces the column count.
Matrix read_dataset_csv(const std::string& path, Eigen::Index expected_cols = -1);

// Columns: step, <model parameter names>, loglik.
void write_trajectory_csv(const std::string& path, const Model& model,
                          const Trajectory& trajectory);

// Long format: estimator,N,checkpoint,metric,quantile,value with quantile in
// q05|q25|q50|q75|q95|mean|sd|band-lo|band-hi.
void write_report_csv(const std::string& path, const ExperimentReport& report);

std::string report_to_json(const ExperimentReport& report);

ExperimentPlan parse_plan_json(const std::string& text);
ExperimentPlan load_plan(const std::string& path);

}  // namespace streamem
