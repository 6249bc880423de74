#pragma once

// Classic two-state Bayesian Knowledge Tracing (no forgetting).

#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ktrace/dataset.hpp"

namespace ktrace::bkt {

struct Params {
    double p_init = 0.5;
    double p_transit = 0.1;
    double p_guess = 0.2;
    double p_slip = 0.1;

    friend bool operator==(const Params&, const Params&) = default;
};

// Box constraints that keep the model away from degenerate fits.
struct Bounds {
    double floor = 0.01;
    double guess_slip_ceiling = 0.3;
    double ceiling = 0.99;

    bool contains(const Params& p) const noexcept;
    Params clamp(Params p) const noexcept;
};

struct TraceStep {
    double p_known_before = 0.0;  // L_t
    double p_correct_pred = 0.0;  // P(correct at t | outcomes before t)
    double p_known_after = 0.0;   // L_{t+1}
};

using Trace = std::vector<TraceStep>;

// L(1-s) + (1-L)g
double predict_correct(double p_known, const Params& params) noexcept;

// Bayes posterior on the observation, then the learning transition.
// Throws DegenerateDenominator when the posterior is undefined.
double update_knowledge(double p_known, bool observed_correct, const Params& params);

Trace trace_student(std::span<const bool> outcomes, const Params& params);
Trace trace_student(const std::vector<bool>& outcomes, const Params& params);

// Total log-likelihood of the outcomes under the traced model.
double log_likelihood(std::span<const std::vector<bool>> sequences, const Params& params);

struct FitOptions {
    Bounds bounds{};
    // Spacing of the exhaustive starting grid in every dimension.
    double grid_step = 0.05;
    // Coordinate refinement halves its step until it drops below this.
    double refine_tolerance = 1e-4;
};

// Maximum-likelihood parameters inside the bounds. Deterministic; ties go to
// the lexicographically smallest (p_init, p_transit, p_guess, p_slip).
// Throws EmptyData if no sequence has an observation.
Params fit_skill(std::span<const std::vector<bool>> sequences, const FitOptions& options = {});

using SkillParams = std::map<std::string, Params>;

// Independent per-skill fit over the student sequences.
SkillParams fit_all(std::span<const StudentSequence> sequences, const SkillCatalog& catalog,
                    const FitOptions& options = {});

// Traces every (student, skill) pair with at least one attempt.
std::map<StudentSkill, Trace> trace_all(std::span<const StudentSequence> sequences,
                                        const SkillCatalog& catalog, const SkillParams& params);

void write_params(std::ostream& out, const SkillParams& params);

}  // namespace ktrace::bkt
