#pragma once

// Performance Factors Analysis: per-skill logistic model of correctness on
// prior success and failure counts,
//     p = 1 / (1 + exp(-(beta + gamma * successes + rho * failures))).

#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ktrace/dataset.hpp"

namespace ktrace::pfa {

struct SkillParams {
    double beta = 0.0;   // intercept
    double gamma = 0.0;  // weight on prior successes
    double rho = 0.0;    // weight on prior failures

    friend bool operator==(const SkillParams&, const SkillParams&) = default;
};

using Params = std::map<std::string, SkillParams>;

struct Counts {
    std::int64_t successes = 0;
    std::int64_t failures = 0;
};

double logistic(double m) noexcept;

double predict(const Counts& counts, const SkillParams& params) noexcept;

struct Trace {
    std::vector<double> predictions;  // step t uses outcomes 1..t-1
    double final_probability = 0.5;   // counts include every observed outcome
};

Trace trace_student(std::span<const bool> outcomes, const SkillParams& params);
Trace trace_student(const std::vector<bool>& outcomes, const SkillParams& params);

// Sufficient statistics of one skill's data: observations grouped by the
// (successes, failures) history that preceded them.
class SkillData {
public:
    explicit SkillData(std::span<const std::vector<bool>> sequences);

    std::size_t observations() const noexcept { return observations_; }

    double log_likelihood(const SkillParams& params) const;
    // Gradient of the total log-likelihood in (beta, gamma, rho) order.
    std::array<double, 3> gradient(const SkillParams& params) const;
    // Row-major 3x3 Hessian of the total log-likelihood.
    std::array<double, 9> hessian(const SkillParams& params) const;

private:
    struct Cell {
        double successes;
        double failures;
        double trials;
        double correct;
    };
    std::vector<Cell> cells_;
    std::size_t observations_ = 0;
};

struct FitOptions {
    double tolerance = 1e-8;      // on the projected gradient max-norm
    int max_iterations = 10000;
    double magnitude_cap = 10.0;  // |beta|, |gamma|, |rho| <= cap
};

struct FitResult {
    SkillParams params;
    int iterations = 0;
    double log_likelihood = 0.0;
    double gradient_norm = 0.0;  // projected max-norm at the returned point
};

// Throws EmptyData when there are no observations.
FitResult fit_skill(std::span<const std::vector<bool>> sequences, const FitOptions& options = {});

// Independent per-skill fits; EmptyData names the skill lacking data.
Params fit(std::span<const StudentSequence> sequences, const SkillCatalog& catalog,
           const FitOptions& options = {});

void write_params(std::ostream& out, const Params& params);

}  // namespace ktrace::pfa
