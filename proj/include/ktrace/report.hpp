#pragma once

// The run report: correlations, pairwise comparisons and run metadata, as
// one JSON document, plus the plain-text table rendering.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <string>

#include "json.hpp"
#include "ktrace/stats.hpp"

namespace ktrace {

struct Report {
    std::string generated_at;  // UTC, ISO 8601; the only non-deterministic field
    std::uint64_t seed = 0;
    std::string config_hash;
    std::size_t interactions = 0;
    std::size_t first_attempts = 0;
    std::size_t students = 0;
    // Per neural model, the number of attempts whose prediction was unusable.
    std::map<std::string, std::size_t> invalid_predictions;
    bool table2_signs = false;
    stats::ComparisonReport results;
};

nlohmann::json report_to_json(const Report& report);
// Throws MalformedReport.
Report report_from_json(const nlohmann::json& doc);
Report load_report(std::istream& in);

// Estimators x skills matrix of r (two decimals), then one upper-triangular
// t matrix per skill with '*' on FDR-significant cells. `negate_t` flips the
// displayed sign of t.
std::string render_report(const Report& report, bool negate_t);

// Two-decimal fixed formatting used by the tables.
std::string format_fixed2(double value);

}  // namespace ktrace
