#pragma once

#include <optional>
#include <string>

namespace ktrace {

// A model's pre-observation correctness probability for one attempt.
// An empty probability is the explicit Invalid marker for attempts where the
// model produced a non-finite value.
struct AttemptPrediction {
    std::string student_id;
    std::string skill_id;
    std::string item_id;
    std::optional<double> probability;

    bool valid() const noexcept { return probability.has_value(); }
};

}  // namespace ktrace
