#include "ktrace/dataset.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <tuple>

#include "csv.hpp"
#include "ktrace/error.hpp"

namespace ktrace {

namespace {

constexpr std::array<const char*, 6> kInteractionColumns = {
    "student_id", "skill_id", "item_id", "attempt_number", "correct", "order_index"};

constexpr std::array<const char*, 3> kPosttestColumns = {"student_id", "skill_id", "score"};

// Maps each required column name to its position in the header.
template <std::size_t N>
std::array<std::size_t, N> locate_columns(const std::vector<std::string>& header,
                                          const std::array<const char*, N>& names) {
    std::array<std::size_t, N> positions{};
    for (std::size_t c = 0; c < N; ++c) {
        auto it = std::find(header.begin(), header.end(), names[c]);
        if (it == header.end())
            throw Error(ErrorKind::MissingColumn,
                        std::string("header lacks column '") + names[c] + "'");
        positions[c] = static_cast<std::size_t>(it - header.begin());
    }
    return positions;
}

std::string row_label(std::size_t row) { return "row " + std::to_string(row); }

}  // namespace

SkillCatalog::SkillCatalog(std::vector<std::string> skill_ids) : skills_(std::move(skill_ids)) {
    std::sort(skills_.begin(), skills_.end());
    skills_.erase(std::unique(skills_.begin(), skills_.end()), skills_.end());
    for (std::size_t i = 0; i < skills_.size(); ++i) index_.emplace(skills_[i], i);
}

SkillCatalog SkillCatalog::from_records(std::span<const InteractionRecord> records) {
    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.skill_id);
    return SkillCatalog(std::move(ids));
}

std::size_t SkillCatalog::index_of(const std::string& skill_id) const {
    auto it = index_.find(skill_id);
    if (it == index_.end()) throw Error(ErrorKind::UnknownSkill, "skill '" + skill_id + "'");
    return it->second;
}

std::vector<InteractionRecord> parse_interactions(std::istream& source) {
    csv::Reader reader(source);
    std::vector<std::string> fields;
    std::vector<InteractionRecord> records;
    if (!reader.next(fields)) return records;
    const auto col = locate_columns(fields, kInteractionColumns);
    const std::size_t width = fields.size();

    std::set<std::tuple<std::string, std::string, std::int64_t>> seen;
    std::size_t row = 0;
    while (reader.next(fields)) {
        ++row;
        if (fields.size() != width)
            throw Error(ErrorKind::MissingColumn, row_label(row) + " has " +
                                                      std::to_string(fields.size()) +
                                                      " fields, expected " + std::to_string(width));
        InteractionRecord rec;
        rec.student_id = fields[col[0]];
        rec.skill_id = fields[col[1]];
        rec.item_id = fields[col[2]];

        const auto attempt = csv::parse_int(fields[col[3]]);
        if (!attempt || *attempt < 1)
            throw Error(ErrorKind::BadNumber,
                        row_label(row) + ": attempt_number '" + fields[col[3]] + "'");
        rec.attempt_number = *attempt;

        const auto& flag = fields[col[4]];
        if (flag == "1") rec.correct = true;
        else if (flag == "0") rec.correct = false;
        else throw Error(ErrorKind::BadBoolean, row_label(row) + ": correct '" + flag + "'");

        const auto order = csv::parse_int(fields[col[5]]);
        if (!order || *order < 0)
            throw Error(ErrorKind::BadNumber,
                        row_label(row) + ": order_index '" + fields[col[5]] + "'");
        rec.order_index = *order;

        if (!seen.emplace(rec.student_id, rec.item_id, rec.attempt_number).second)
            throw Error(ErrorKind::DuplicateAttemptKey,
                        row_label(row) + ": (" + rec.student_id + ", " + rec.item_id + ", " +
                            std::to_string(rec.attempt_number) + ")");
        records.push_back(std::move(rec));
    }
    return records;
}

void write_interactions(std::ostream& out, std::span<const InteractionRecord> records) {
    out << "student_id,skill_id,item_id,attempt_number,correct,order_index\n";
    for (const auto& r : records) {
        out << r.student_id << ',' << r.skill_id << ',' << r.item_id << ',' << r.attempt_number
            << ',' << (r.correct ? 1 : 0) << ',' << r.order_index << '\n';
    }
}

std::vector<InteractionRecord> first_attempts(std::span<const InteractionRecord> records) {
    std::vector<InteractionRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [](const InteractionRecord& r) { return r.attempt_number == 1; });
    return out;
}

std::vector<StudentSequence> build_sequences(std::span<const InteractionRecord> records,
                                             const SkillCatalog& catalog) {
    struct Keyed {
        std::int64_t order;
        Step step;
    };
    std::map<std::string, std::vector<Keyed>> by_student;
    for (const auto& r : records) {
        if (r.attempt_number != 1)
            throw Error(ErrorKind::NotFirstAttempt,
                        "student '" + r.student_id + "' item '" + r.item_id + "' attempt " +
                            std::to_string(r.attempt_number));
        Step step{catalog.index_of(r.skill_id), r.skill_id, r.item_id, r.correct};
        by_student[r.student_id].push_back({r.order_index, std::move(step)});
    }

    std::vector<StudentSequence> sequences;
    sequences.reserve(by_student.size());
    for (auto& [student, keyed] : by_student) {
        std::stable_sort(keyed.begin(), keyed.end(),
                         [](const Keyed& a, const Keyed& b) { return a.order < b.order; });
        for (std::size_t i = 1; i < keyed.size(); ++i) {
            if (keyed[i].order == keyed[i - 1].order)
                throw Error(ErrorKind::DuplicateOrderIndex,
                            "student '" + student + "' order_index " +
                                std::to_string(keyed[i].order));
        }
        StudentSequence seq{student, {}};
        seq.steps.reserve(keyed.size());
        for (auto& k : keyed) seq.steps.push_back(std::move(k.step));
        sequences.push_back(std::move(seq));
    }
    return sequences;
}

std::vector<SkillHistory> skill_histories(std::span<const StudentSequence> sequences,
                                          std::size_t skill) {
    std::vector<SkillHistory> out;
    for (const auto& seq : sequences) {
        SkillHistory h{seq.student_id, {}, {}};
        for (const auto& step : seq.steps) {
            if (step.skill != skill) continue;
            h.items.push_back(step.item_id);
            h.outcomes.push_back(step.correct);
        }
        if (!h.outcomes.empty()) out.push_back(std::move(h));
    }
    return out;
}

void PosttestScores::insert(const std::string& student_id, const std::string& skill_id,
                            double score) {
    if (!(score >= 0.0 && score <= 1.0))
        throw Error(ErrorKind::ScoreOutOfRange,
                    "(" + student_id + ", " + skill_id + ") score " + csv::format_double(score));
    if (!entries_.emplace(StudentSkill{student_id, skill_id}, score).second)
        throw Error(ErrorKind::DuplicateKey, "(" + student_id + ", " + skill_id + ")");
}

std::optional<double> PosttestScores::find(const std::string& student_id,
                                           const std::string& skill_id) const {
    auto it = entries_.find(StudentSkill{student_id, skill_id});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

PosttestScores parse_posttest(std::istream& source) {
    csv::Reader reader(source);
    std::vector<std::string> fields;
    PosttestScores scores;
    if (!reader.next(fields)) return scores;
    const auto col = locate_columns(fields, kPosttestColumns);
    const std::size_t width = fields.size();
    std::size_t row = 0;
    while (reader.next(fields)) {
        ++row;
        if (fields.size() != width)
            throw Error(ErrorKind::MissingColumn, row_label(row) + " has " +
                                                      std::to_string(fields.size()) + " fields");
        const auto score = csv::parse_double(fields[col[2]]);
        if (!score)
            throw Error(ErrorKind::BadNumber, row_label(row) + ": score '" + fields[col[2]] + "'");
        try {
            scores.insert(fields[col[0]], fields[col[1]], *score);
        } catch (const Error& e) {
            throw Error(e.kind(), row_label(row) + ": " + fields[col[0]] + "," + fields[col[1]]);
        }
    }
    return scores;
}

void write_posttest(std::ostream& out, const PosttestScores& scores) {
    out << "student_id,skill_id,score\n";
    for (const auto& [key, score] : scores.entries())
        out << key.first << ',' << key.second << ',' << csv::format_double(score) << '\n';
}

}  // namespace ktrace
