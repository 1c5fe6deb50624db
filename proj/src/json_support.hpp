#pragma once

// Shared nlohmann::json helpers for plan files, run configs and reports.
// Internal to the library sources; the public headers stay json-free.

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "streamem/experiment.hpp"
#include "streamem/types.hpp"

namespace streamem::jsupport {

using nlohmann::json;

// Rejects keys outside the allowed set so typos never pass silently.
void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& where);

json parse_text(const std::string& text, const std::string& where);
json load_file(const std::string& path, const std::string& where);

Vector vec_from(const json& arr, const std::string& where);
json vec_to(const Vector& v);

// Factor-loading spec: either an explicit array of length dim, or one of the
// generator forms {"e1-norm-sq": v} (first basis vector scaled to |u|^2 = v)
// and {"fill-norm-sq": v} (constant vector scaled to |u|^2 = v).
Vector loading_from(const json& v, Eigen::Index dim, const std::string& where);

FitSpec fit_spec_from(const json& obj, const std::string& where);
ExperimentPlan plan_from(const json& obj);
json report_to(const ExperimentReport& report);

}  // namespace streamem::jsupport
