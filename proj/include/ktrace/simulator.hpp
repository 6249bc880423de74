#pragma once

// Synthetic cohorts drawn from a BKT generative process with a per-student
// ability offset on the emission logits, plus posttest subscores drawn from
// the final latent knowledge state.

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ktrace/bkt.hpp"
#include "ktrace/dataset.hpp"

namespace ktrace::sim {

struct SkillSpec {
    std::string skill_id;
    int opportunities = 1;
    bkt::Params params;
};

struct CohortSpec {
    std::size_t num_students = 1;
    std::vector<SkillSpec> skills;
    double ability_sd = 0.0;
    int posttest_items_per_skill = 10;
    double test_guess = 0.0;
    double test_slip = 0.0;
    std::uint64_t seed = 0;

    // Throws InvalidArgument.
    void validate() const;
};

struct GroundTruth {
    std::map<StudentSkill, bool> final_known;
    std::map<std::string, double> ability;
};

struct Cohort {
    std::vector<InteractionRecord> interactions;
    PosttestScores posttest;
    GroundTruth truth;
};

// sigmoid(logit(p) + offset), with 0 and 1 left exact.
double shift_probability(double p, double offset) noexcept;

// Each student draws from its own stream seeded by (seed, student index).
// Within a student the skills' opportunities are interleaved in a shuffled
// order that keeps each skill's own sequence; knowledge may be learned after
// every emission.
Cohort generate_cohort(const CohortSpec& spec);

// 500 students, four skills with 9 to 12 opportunities each.
CohortSpec default_scenario(std::uint64_t seed);
// Fast learning and long practice: final knowledge saturates while posttest
// scores stay spread out by ability.
CohortSpec mastery_saturation_scenario(std::uint64_t seed);

// student_id,skill_id,final_known,ability
void write_ground_truth(std::ostream& out, const GroundTruth& truth);

}  // namespace ktrace::sim
