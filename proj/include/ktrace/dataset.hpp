#pragma once

// Interaction logs and posttest subscores.
//
// Interaction CSV:  student_id,skill_id,item_id,attempt_number,correct,order_index
// Posttest CSV:     student_id,skill_id,score
//
// Everything here is immutable after construction; the pipeline filters to
// first attempts explicitly (first_attempts) before building sequences.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ktrace {

using StudentSkill = std::pair<std::string, std::string>;  // (student_id, skill_id)

struct InteractionRecord {
    std::string student_id;
    std::string skill_id;
    std::string item_id;
    std::int64_t attempt_number = 1;
    bool correct = false;
    std::int64_t order_index = 0;

    friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

// Dense, lexicographically ordered skill index.
class SkillCatalog {
public:
    SkillCatalog() = default;
    explicit SkillCatalog(std::vector<std::string> skill_ids);

    static SkillCatalog from_records(std::span<const InteractionRecord> records);

    std::size_t size() const noexcept { return skills_.size(); }
    const std::vector<std::string>& skills() const noexcept { return skills_; }
    const std::string& skill(std::size_t index) const { return skills_.at(index); }

    // Throws UnknownSkill.
    std::size_t index_of(const std::string& skill_id) const;
    bool contains(const std::string& skill_id) const { return index_.contains(skill_id); }

private:
    std::vector<std::string> skills_;
    std::map<std::string, std::size_t> index_;
};

struct Step {
    std::size_t skill = 0;  // dense index into the catalog
    std::string skill_id;
    std::string item_id;
    bool correct = false;
};

struct StudentSequence {
    std::string student_id;
    std::vector<Step> steps;  // ascending order_index, first attempts only
};

// One student's chronological outcomes on one skill.
struct SkillHistory {
    std::string student_id;
    std::vector<std::string> items;
    std::vector<bool> outcomes;
};

class PosttestScores {
public:
    // Throws ScoreOutOfRange or DuplicateKey.
    void insert(const std::string& student_id, const std::string& skill_id, double score);

    std::optional<double> find(const std::string& student_id, const std::string& skill_id) const;
    const std::map<StudentSkill, double>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

private:
    std::map<StudentSkill, double> entries_;
};

// Errors name the data row, counting from 1 after the header.
std::vector<InteractionRecord> parse_interactions(std::istream& source);
void write_interactions(std::ostream& out, std::span<const InteractionRecord> records);

std::vector<InteractionRecord> first_attempts(std::span<const InteractionRecord> records);

// One sequence per student, ordered by student_id.
std::vector<StudentSequence> build_sequences(std::span<const InteractionRecord> records,
                                             const SkillCatalog& catalog);

// Per-student subsequences on one skill, in global chronological order.
// Students who never attempted the skill are skipped.
std::vector<SkillHistory> skill_histories(std::span<const StudentSequence> sequences,
                                          std::size_t skill);

PosttestScores parse_posttest(std::istream& source);
void write_posttest(std::ostream& out, const PosttestScores& scores);

}  // namespace ktrace
