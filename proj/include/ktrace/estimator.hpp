#pragma once

// Turns per-attempt model output into per-(student, skill) knowledge
// estimates. The mean estimators average a model's pre-observation
// correctness probabilities over every attempt a student made on a skill;
// the final estimators take BKT's or PFA's post-last-attempt value.

#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ktrace/bkt.hpp"
#include "ktrace/dataset.hpp"
#include "ktrace/pfa.hpp"
#include "ktrace/prediction.hpp"

namespace ktrace {

enum class Estimator { MeanDkt, MeanDkvmn, Pfa, MeanPfa, Bkt, MeanBkt };

// Canonical report order.
inline constexpr std::array<Estimator, 6> kAllEstimators = {
    Estimator::MeanDkt, Estimator::MeanDkvmn, Estimator::Pfa,
    Estimator::MeanPfa, Estimator::Bkt,       Estimator::MeanBkt};

std::string_view estimator_name(Estimator e) noexcept;
// Throws InvalidArgument for unknown names.
Estimator parse_estimator(std::string_view name);

struct KnowledgeTable {
    std::string estimator_name;
    // Absent pairs have no entry.
    std::map<StudentSkill, double> entries;

    std::optional<double> find(const std::string& student_id, const std::string& skill_id) const;
};

// Mean of valid probabilities per (student, skill); Invalid markers are
// dropped from numerator and denominator alike.
KnowledgeTable mean_aggregate(std::span<const AttemptPrediction> predictions, std::string estimator_name);

// Post-update knowledge probability of the last traced step.
KnowledgeTable final_estimate_bkt(const std::map<StudentSkill, bkt::Trace>& traces);
// Mean of the per-step predicted correctness probabilities.
KnowledgeTable mean_estimate_bkt(const std::map<StudentSkill, bkt::Trace>& traces);

// logistic(beta + gamma * successes + rho * failures) over the full history.
KnowledgeTable final_estimate_pfa(std::span<const StudentSequence> sequences, const pfa::Params& params);
// Mean of the per-step PFA predictions.
KnowledgeTable mean_estimate_pfa(std::span<const StudentSequence> sequences, const pfa::Params& params);

// estimator,student_id,skill_id,estimate
void write_knowledge_csv(std::ostream& out, std::span<const KnowledgeTable> tables);

}  // namespace ktrace
