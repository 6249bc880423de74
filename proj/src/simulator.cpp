#include "ktrace/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "csv.hpp"
#include "ktrace/error.hpp"
#include "ktrace/rng.hpp"

namespace ktrace::sim {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::string student_name(std::size_t index, std::size_t count) {
    std::string digits = std::to_string(index + 1);
    const std::size_t width = std::max<std::size_t>(4, std::to_string(count).size());
    return "s" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

void CohortSpec::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, "cohort spec: " + what); };
    if (num_students == 0) fail("num_students must be positive");
    if (skills.empty()) fail("no skills");
    for (const auto& s : skills) {
        if (s.skill_id.empty()) fail("empty skill id");
        if (s.opportunities < 1) fail("skill '" + s.skill_id + "' needs at least one opportunity");
        const auto& p = s.params;
        if (!is_probability(p.p_init) || !is_probability(p.p_transit) || !is_probability(p.p_guess) ||
            !is_probability(p.p_slip))
            fail("skill '" + s.skill_id + "' has a parameter outside [0, 1]");
    }
    if (!(ability_sd >= 0.0) || !std::isfinite(ability_sd)) fail("ability_sd must be non-negative");
    if (posttest_items_per_skill < 1) fail("posttest_items_per_skill must be positive");
    if (!is_probability(test_guess) || !is_probability(test_slip)) fail("test guess/slip outside [0, 1]");
}

double shift_probability(double p, double offset) noexcept {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    if (offset == 0.0) return p;
    const double logit = std::log(p / (1.0 - p));
    return 1.0 / (1.0 + std::exp(-(logit + offset)));
}

Cohort generate_cohort(const CohortSpec& spec) {
    spec.validate();
    Cohort cohort;
    const std::size_t num_skills = spec.skills.size();

    for (std::size_t i = 0; i < spec.num_students; ++i) {
        Rng rng(mix_seed(spec.seed, i));
        const std::string student = student_name(i, spec.num_students);
        const double ability = spec.ability_sd > 0.0 ? spec.ability_sd * rng.normal() : 0.0;
        cohort.truth.ability.emplace(student, ability);

        std::vector<bool> known(num_skills);
        std::vector<double> p_right(num_skills), p_wrong_guess(num_skills);
        std::vector<std::size_t> schedule;
        for (std::size_t k = 0; k < num_skills; ++k) {
            const auto& p = spec.skills[k].params;
            known[k] = rng.bernoulli(p.p_init);
            p_right[k] = shift_probability(1.0 - p.p_slip, ability);
            p_wrong_guess[k] = shift_probability(p.p_guess, ability);
            schedule.insert(schedule.end(), static_cast<std::size_t>(spec.skills[k].opportunities), k);
        }
        rng.shuffle(std::span<std::size_t>(schedule));

        std::vector<int> opportunity(num_skills, 0);
        std::int64_t order = 0;
        for (std::size_t k : schedule) {
            const auto& skill = spec.skills[k];
            const bool correct = rng.bernoulli(known[k] ? p_right[k] : p_wrong_guess[k]);
            if (!known[k]) known[k] = rng.bernoulli(skill.params.p_transit);
            ++opportunity[k];
            cohort.interactions.push_back({student, skill.skill_id,
                                           skill.skill_id + ":" + std::to_string(opportunity[k]), 1, correct,
                                           order++});
        }

        const double test_right = shift_probability(1.0 - spec.test_slip, ability);
        const double test_guess = shift_probability(spec.test_guess, ability);
        for (std::size_t k = 0; k < num_skills; ++k) {
            int hits = 0;
            for (int item = 0; item < spec.posttest_items_per_skill; ++item)
                hits += rng.bernoulli(known[k] ? test_right : test_guess) ? 1 : 0;
            const std::string& skill_id = spec.skills[k].skill_id;
            cohort.posttest.insert(student, skill_id,
                                   static_cast<double>(hits) / static_cast<double>(spec.posttest_items_per_skill));
            cohort.truth.final_known.emplace(StudentSkill{student, skill_id}, known[k]);
        }
    }
    return cohort;
}

CohortSpec default_scenario(std::uint64_t seed) {
    CohortSpec spec;
    spec.num_students = 500;
    spec.skills = {
        {"addition", 9, {0.45, 0.30, 0.20, 0.05}},
        {"ordering", 12, {0.25, 0.20, 0.20, 0.10}},
        {"placement", 12, {0.35, 0.15, 0.25, 0.08}},
        {"sequence", 9, {0.30, 0.25, 0.15, 0.10}},
    };
    spec.ability_sd = 0.8;
    spec.posttest_items_per_skill = 10;
    spec.test_guess = 0.15;
    spec.test_slip = 0.15;
    spec.seed = seed;
    return spec;
}

CohortSpec mastery_saturation_scenario(std::uint64_t seed) {
    CohortSpec spec;
    spec.num_students = 400;
    const bkt::Params fast{0.20, 0.50, 0.20, 0.10};
    spec.skills = {
        {"addition", 16, fast},
        {"ordering", 16, fast},
        {"placement", 16, fast},
        {"sequence", 16, fast},
    };
    spec.ability_sd = 1.2;
    spec.posttest_items_per_skill = 10;
    spec.test_guess = 0.15;
    spec.test_slip = 0.15;
    spec.seed = seed;
    return spec;
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
    out << "student_id,skill_id,final_known,ability\n";
    for (const auto& [key, known] : truth.final_known) {
        auto it = truth.ability.find(key.first);
        const double ability = it == truth.ability.end() ? 0.0 : it->second;
        out << key.first << ',' << key.second << ',' << (known ? 1 : 0) << ',' << csv::format_double(ability)
            << '\n';
    }
}

}  // namespace ktrace::sim
