#pragma once

// End-to-end runs: load data, fit the models the selected estimators need,
// score the same data, correlate with the posttest and compare estimators.
//
// Config file (JSON; every block optional, relative paths resolve against
// the config file's directory):
//
//   {
//     "interactions": "data/interactions.csv",
//     "posttest": "data/posttest.csv",
//     "output": "out",
//     "seed": 42,
//     "estimators": ["mean-DKT", "mean-DKVMN", "PFA", "mean-PFA", "BKT", "mean-BKT"],
//     "bkt": {"floor": 0.01, "guess_slip_ceiling": 0.3, "ceiling": 0.99,
//             "grid_step": 0.05, "refine_tolerance": 1e-4},
//     "pfa": {"tolerance": 1e-8, "max_iterations": 10000, "magnitude_cap": 10},
//     "dkt": {"hidden_size": 64, "learning_rate": 0.01, "epochs": 50, "lambda_r": 0.1,
//             "lambda_w1": 0.03, "lambda_w2": 3.0, "max_grad_norm": 5.0, "seed": 42},
//     "dkvmn": {"memory_slots": 8, "key_dim": 16, "value_dim": 16, "summary_dim": 16,
//               "learning_rate": 0.01, "epochs": 50, "max_grad_norm": 5.0, "seed": 42},
//     "stats": {"q": 0.05, "family": "global", "procedure": "benjamini-hochberg",
//               "table2_signs": false}
//   }
//
// Model seeds default to the global seed. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ktrace/bkt.hpp"
#include "ktrace/dkt.hpp"
#include "ktrace/dkvmn.hpp"
#include "ktrace/estimator.hpp"
#include "ktrace/pfa.hpp"
#include "ktrace/report.hpp"
#include "ktrace/stats.hpp"

namespace ktrace::pipeline {

struct RunConfig {
    std::filesystem::path interactions;
    std::filesystem::path posttest;
    std::filesystem::path output;
    std::uint64_t seed = 42;
    std::vector<Estimator> estimators{kAllEstimators.begin(), kAllEstimators.end()};
    bkt::FitOptions bkt;
    pfa::FitOptions pfa;
    dkt::Config dkt;
    dkvmn::Config dkvmn;
    stats::CompareOptions stats;
    bool table2_signs = false;

    // Throws InvalidConfig.
    void validate() const;
    // Re-seed the run and every model that inherited the global seed.
    void set_seed(std::uint64_t seed);

    // Model seeds given explicitly in the config survive set_seed.
    bool dkt_seed_explicit = false;
    bool dkvmn_seed_explicit = false;
};

// Throws InvalidConfig.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
// Throws IoError or InvalidConfig.
RunConfig load_config(const std::filesystem::path& path);

// Settings that determine the results (paths excluded), for hashing.
nlohmann::json effective_settings(const RunConfig& config);
// FNV-1a 64-bit, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

struct RunResult {
    Report report;
    std::vector<std::filesystem::path> files;
};

// Writes estimates.csv, correlations.csv, comparisons.csv, report.json, the
// fitted-parameter CSVs and model checkpoints. On failure every file this
// run created is removed and the error is rethrown with its stage.
RunResult run(const RunConfig& config);

enum class Scenario { Default, MasterySaturation };
// "default" or "mastery-saturation"; throws InvalidArgument.
Scenario parse_scenario(const std::string& name);

// interactions.csv, posttest.csv, ground_truth.csv. Throws IoError.
std::vector<std::filesystem::path> simulate(Scenario scenario, std::uint64_t seed,
                                            const std::filesystem::path& out_dir);

}  // namespace ktrace::pipeline
