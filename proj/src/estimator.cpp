#include "ktrace/estimator.hpp"

#include "csv.hpp"
#include "ktrace/error.hpp"

namespace ktrace {

std::string_view estimator_name(Estimator e) noexcept {
    switch (e) {
        case Estimator::MeanDkt: return "mean-DKT";
        case Estimator::MeanDkvmn: return "mean-DKVMN";
        case Estimator::Pfa: return "PFA";
        case Estimator::MeanPfa: return "mean-PFA";
        case Estimator::Bkt: return "BKT";
        case Estimator::MeanBkt: return "mean-BKT";
    }
    return "";
}

Estimator parse_estimator(std::string_view name) {
    for (Estimator e : kAllEstimators)
        if (estimator_name(e) == name) return e;
    throw Error(ErrorKind::InvalidArgument, "unknown estimator '" + std::string(name) + "'");
}

std::optional<double> KnowledgeTable::find(const std::string& student_id, const std::string& skill_id) const {
    auto it = entries.find(StudentSkill{student_id, skill_id});
    if (it == entries.end()) return std::nullopt;
    return it->second;
}

KnowledgeTable mean_aggregate(std::span<const AttemptPrediction> predictions, std::string estimator_name) {
    struct Sum {
        double total = 0.0;
        std::size_t count = 0;
    };
    std::map<StudentSkill, Sum> sums;
    for (const auto& p : predictions) {
        if (!p.valid()) continue;
        auto& s = sums[{p.student_id, p.skill_id}];
        s.total += *p.probability;
        ++s.count;
    }
    KnowledgeTable table{std::move(estimator_name), {}};
    for (const auto& [key, s] : sums) table.entries.emplace(key, s.total / static_cast<double>(s.count));
    return table;
}

KnowledgeTable final_estimate_bkt(const std::map<StudentSkill, bkt::Trace>& traces) {
    KnowledgeTable table{std::string(estimator_name(Estimator::Bkt)), {}};
    for (const auto& [key, trace] : traces)
        if (!trace.empty()) table.entries.emplace(key, trace.back().p_known_after);
    return table;
}

KnowledgeTable mean_estimate_bkt(const std::map<StudentSkill, bkt::Trace>& traces) {
    std::vector<AttemptPrediction> predictions;
    for (const auto& [key, trace] : traces)
        for (const auto& step : trace) predictions.push_back({key.first, key.second, {}, step.p_correct_pred});
    return mean_aggregate(predictions, std::string(estimator_name(Estimator::MeanBkt)));
}

namespace {

template <typename Visit>
void for_each_pfa_trace(std::span<const StudentSequence> sequences, const pfa::Params& params, Visit&& visit) {
    for (const auto& seq : sequences) {
        std::map<std::string, std::vector<bool>> by_skill;
        for (const auto& step : seq.steps) by_skill[step.skill_id].push_back(step.correct);
        for (const auto& [skill, outcomes] : by_skill) {
            auto it = params.find(skill);
            if (it == params.end())
                throw Error(ErrorKind::UnknownSkill, "no PFA parameters for skill '" + skill + "'");
            visit(StudentSkill{seq.student_id, skill}, pfa::trace_student(outcomes, it->second));
        }
    }
}

}  // namespace

KnowledgeTable final_estimate_pfa(std::span<const StudentSequence> sequences, const pfa::Params& params) {
    KnowledgeTable table{std::string(estimator_name(Estimator::Pfa)), {}};
    for_each_pfa_trace(sequences, params, [&](const StudentSkill& key, const pfa::Trace& trace) {
        table.entries.emplace(key, trace.final_probability);
    });
    return table;
}

KnowledgeTable mean_estimate_pfa(std::span<const StudentSequence> sequences, const pfa::Params& params) {
    std::vector<AttemptPrediction> predictions;
    for_each_pfa_trace(sequences, params, [&](const StudentSkill& key, const pfa::Trace& trace) {
        for (double p : trace.predictions) predictions.push_back({key.first, key.second, {}, p});
    });
    return mean_aggregate(predictions, std::string(estimator_name(Estimator::MeanPfa)));
}

void write_knowledge_csv(std::ostream& out, std::span<const KnowledgeTable> tables) {
    out << "estimator,student_id,skill_id,estimate\n";
    for (const auto& table : tables)
        for (const auto& [key, value] : table.entries)
            out << table.estimator_name << ',' << key.first << ',' << key.second << ','
                << csv::format_double(value) << '\n';
}

}  // namespace ktrace
