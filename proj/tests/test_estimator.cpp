#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ktrace/error.hpp"
#include "ktrace/estimator.hpp"

using namespace ktrace;

namespace {

std::vector<AttemptPrediction> preds(const std::string& student, const std::string& skill,
                                     std::vector<std::optional<double>> values) {
    std::vector<AttemptPrediction> out;
    for (auto v : values) out.push_back({student, skill, "i", v});
    return out;
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("mean aggregation") {
    CHECK(*mean_aggregate(preds("s1", "a", {0.2, 0.4, 0.9}), "m").find("s1", "a") == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(*mean_aggregate(preds("s1", "a", {0.7}), "m").find("s1", "a") == 0.7);
    CHECK(*mean_aggregate(preds("s1", "a", {0.3, std::nullopt, 0.5}), "m").find("s1", "a") ==
          doctest::Approx(0.4).epsilon(1e-15));
    // Only Invalid markers: nothing to average, so the pair is Absent.
    CHECK_FALSE(mean_aggregate(preds("s1", "a", {std::nullopt}), "m").find("s1", "a").has_value());

    auto mixed = preds("s1", "a", {0.2});
    const auto other = preds("s2", "a", {0.8});
    mixed.insert(mixed.end(), other.begin(), other.end());
    const auto table = mean_aggregate(mixed, "m");
    CHECK(table.entries.size() == 2);
    CHECK(table.estimator_name == "m");
}

TEST_CASE("final BKT estimate") {
    std::map<StudentSkill, bkt::Trace> traces;
    traces[{"s1", "a"}] = {{0.4, 0.5, 0.87}};
    traces[{"s2", "a"}] = {};
    const auto table = final_estimate_bkt(traces);
    CHECK(*table.find("s1", "a") == 0.87);
    CHECK_FALSE(table.find("s2", "a").has_value());
    CHECK_FALSE(table.find("s3", "a").has_value());
    CHECK(table.estimator_name == "BKT");

    const auto long_trace = bkt::trace_student(std::vector<bool>(30, true), {0.3, 0.3, 0.2, 0.1});
    std::map<StudentSkill, bkt::Trace> saturated{{{"s1", "a"}, long_trace}};
    CHECK(*final_estimate_bkt(saturated).find("s1", "a") > 0.99);
}

TEST_CASE("mean BKT estimate") {
    std::map<StudentSkill, bkt::Trace> traces;
    traces[{"s1", "a"}] = {{0.5, 0.55, 0.6}, {0.6, 0.80, 0.7}};
    traces[{"s2", "a"}] = {{0.5, 0.35, 0.6}};
    const auto table = mean_estimate_bkt(traces);
    CHECK(*table.find("s1", "a") == doctest::Approx(0.675).epsilon(1e-15));
    CHECK(*table.find("s2", "a") == 0.35);
    CHECK(table.estimator_name == "mean-BKT");
}

TEST_CASE("PFA estimates") {
    const StudentSequence s{"s1", {{0, "a", "i1", true}, {1, "b", "i2", false}, {0, "a", "i3", true}}};
    const std::vector<StudentSequence> seqs = {s};
    const pfa::Params zero{{"a", {}}, {"b", {}}};
    CHECK(*final_estimate_pfa(seqs, zero).find("s1", "a") == 0.5);
    CHECK(*mean_estimate_pfa(seqs, zero).find("s1", "b") == 0.5);

    const pfa::Params fitted{{"a", {0.0, 1.0, -1.0}}, {"b", {0.0, 1.0, -1.0}}};
    CHECK(*final_estimate_pfa(seqs, fitted).find("s1", "a") == doctest::Approx(0.880797).epsilon(1e-6));
    // Mean over a's two pre-attempt predictions: logistic(0), logistic(1).
    CHECK(*mean_estimate_pfa(seqs, fitted).find("s1", "a") ==
          doctest::Approx((0.5 + 1.0 / (1.0 + std::exp(-1.0))) / 2.0).epsilon(1e-15));
    // Single attempt: mean equals that step's prediction.
    CHECK(*mean_estimate_pfa(seqs, fitted).find("s1", "b") == 0.5);
    CHECK_FALSE(final_estimate_pfa(seqs, fitted).find("s1", "c").has_value());

    const pfa::Params missing{{"a", {}}};
    CHECK_THROWS_AS(final_estimate_pfa(seqs, missing), Error);
}

TEST_CASE("estimator names") {
    CHECK(kAllEstimators.size() == 6);
    for (Estimator e : kAllEstimators) CHECK(parse_estimator(estimator_name(e)) == e);
    CHECK(estimator_name(Estimator::MeanDkt) == "mean-DKT");
    CHECK_THROWS_AS(parse_estimator("DKT"), Error);
}

TEST_CASE("knowledge CSV") {
    KnowledgeTable t{"BKT", {{{"s1", "a"}, 0.25}}};
    std::ostringstream out;
    write_knowledge_csv(out, std::vector<KnowledgeTable>{t});
    CHECK(out.str() == "estimator,student_id,skill_id,estimate\nBKT,s1,a,0.25\n");
}

}  // TEST_SUITE
