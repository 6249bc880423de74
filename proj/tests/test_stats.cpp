#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ktrace/error.hpp"
#include "ktrace/stats.hpp"
#include "support.hpp"

using namespace ktrace;

namespace {

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidArgument;
}

// Estimates equal to posttest plus student-specific noise of scale `noise`.
KnowledgeTable noisy_table(const std::string& name, const PosttestScores& post, double noise, std::uint64_t seed) {
    Rng rng(seed);
    KnowledgeTable t{name, {}};
    for (const auto& [key, score] : post.entries()) t.entries[key] = score + noise * rng.normal();
    return t;
}

PosttestScores random_posttest(std::size_t students, const std::vector<std::string>& skills, std::uint64_t seed) {
    Rng rng(seed);
    PosttestScores post;
    for (std::size_t s = 0; s < students; ++s)
        for (const auto& k : skills) post.insert("s" + std::to_string(s), k, std::floor(rng.uniform() * 11) / 10.0);
    return post;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("pearson hand values") {
    const std::vector<double> x = {1, 2, 3};
    CHECK(stats::pearson(x, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(stats::pearson(x, std::vector<double>{6, 4, 5}) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(kind_of([&] { stats::pearson(x, std::vector<double>{3, 3, 3}); }) == ErrorKind::ZeroVariance);
    CHECK(kind_of([] { stats::pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}); }) ==
          ErrorKind::TooFewPairs);
}

TEST_CASE("pearson agrees with the two-pass oracle") {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + rng.below(200);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.normal() * 10 + 3;
            y[i] = 0.4 * x[i] + rng.normal();
        }
        CHECK(std::abs(stats::pearson(x, y) - oracle::pearson(x, y)) < 1e-12);
    }
}

TEST_CASE("dependent correlation t") {
    const auto ts = stats::dependent_corr_t(0.6, 0.5, 0.7, 103);
    CHECK(ts.t == doctest::Approx(1.6298).epsilon(1e-3 / 1.6298));
    CHECK(ts.t == doctest::Approx(oracle::hotelling_t(0.6, 0.5, 0.7, 103)).epsilon(1e-12));
    CHECK(ts.df == 100);

    CHECK(stats::dependent_corr_t(0.4, 0.4, 0.9, 50).t == 0.0);
    CHECK(stats::dependent_corr_t(0.4, 0.4, 1.0, 50).t == 0.0);

    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const double ray = rng.uniform(-0.8, 0.8), rby = rng.uniform(-0.8, 0.8), rab = rng.uniform(-0.5, 0.9);
        const int n = 10 + static_cast<int>(rng.below(200));
        try {
            const auto fwd = stats::dependent_corr_t(ray, rby, rab, n);
            const auto rev = stats::dependent_corr_t(rby, ray, rab, n);
            CHECK(rev.t == -fwd.t);
            CHECK(fwd.t == doctest::Approx(oracle::hotelling_t(ray, rby, rab, n)).epsilon(1e-9));
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::SingularCorrelationMatrix);
        }
    }
    CHECK(kind_of([] { stats::dependent_corr_t(0.9, 0.1, 0.95, 40); }) == ErrorKind::SingularCorrelationMatrix);
    CHECK(kind_of([] { stats::dependent_corr_t(0.5, 0.4, 0.3, 3); }) == ErrorKind::TooFewPairs);
}

TEST_CASE("p_from_t") {
    CHECK(stats::p_from_t(0.0, 7) == 1.0);
    CHECK(std::abs(stats::p_from_t(1.0, 1) - 0.5) < 1e-9);
    for (double t : {0.1, 0.7, 1.5, 3.0, 12.0}) {
        CHECK(stats::p_from_t(t, 1) == doctest::Approx(oracle::p_df1(t)).epsilon(1e-12));
        CHECK(stats::p_from_t(-t, 2) == doctest::Approx(oracle::p_df2(t)).epsilon(1e-12));
    }
    double previous = 1.0;
    for (double t = 0.25; t < 8.0; t += 0.25) {
        const double p = stats::p_from_t(t, 30);
        CHECK(p < previous);
        previous = p;
    }
    // Large-df limit is the normal tail: p(1.959964) ~ 0.05.
    CHECK(stats::p_from_t(1.959964, 1000000) == doctest::Approx(0.05).epsilon(1e-4));
}

TEST_CASE("benjamini-hochberg") {
    CHECK(stats::benjamini_hochberg(std::vector<double>{0.01, 0.02, 0.04, 0.5}, 0.05) ==
          std::vector<bool>{true, true, false, false});
    CHECK(stats::benjamini_hochberg(std::vector<double>(5, 1.0), 0.05) == std::vector<bool>(5, false));
    CHECK(stats::benjamini_hochberg(std::vector<double>{0.04}, 0.05) == std::vector<bool>{true});
    CHECK(stats::benjamini_hochberg(std::vector<double>{}, 0.05).empty());
    // Step-up: a later passing rank rescues earlier failing ones.
    CHECK(stats::benjamini_hochberg(std::vector<double>{0.03, 0.035, 0.04}, 0.05) ==
          std::vector<bool>{true, true, true});

    Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> p(1 + rng.below(40));
        for (double& v : p) v = rng.bernoulli(0.2) ? std::round(rng.uniform() * 20) / 400 : rng.uniform() * 0.2;
        CHECK(stats::benjamini_hochberg(p, 0.05) == oracle::benjamini_hochberg(p, 0.05));
    }
}

TEST_CASE("benjamini-yekutieli is the step-up at q / H_m") {
    const std::vector<double> p = {0.001, 0.01, 0.02, 0.3};
    const double hm = 1.0 + 0.5 + 1.0 / 3.0 + 0.25;
    CHECK(stats::benjamini_yekutieli(p, 0.05) == oracle::benjamini_hochberg(p, 0.05 / hm));
}

TEST_CASE("compare_all shape and contracts") {
    const std::vector<std::string> skills = {"a", "b", "c", "d"};
    const auto post = random_posttest(60, skills, 4);
    std::vector<KnowledgeTable> tables;
    for (int i = 0; i < 6; ++i) tables.push_back(noisy_table("e" + std::to_string(i), post, 0.1 + 0.15 * i, 10 + i));
    const auto report = stats::compare_all(tables, post);
    CHECK(report.correlations.size() == 24);
    CHECK(report.comparisons.size() == 60);
    for (const auto& skill : skills) {
        int cells = 0;
        for (const auto& c : report.comparisons) cells += c.skill == skill;
        CHECK(cells == 15);
    }
    // Significance flags are exactly B-H over the global family.
    std::vector<double> p;
    for (const auto& c : report.comparisons) p.push_back(c.p);
    const auto expected = oracle::benjamini_hochberg(p, 0.05);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(report.comparisons[i].significant == expected[i]);

    // Repeatable.
    const auto again = stats::compare_all(tables, post);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(*again.comparisons[i].t == *report.comparisons[i].t);
}

TEST_CASE("identical tables compare to t = 0") {
    const auto post = random_posttest(40, {"a"}, 5);
    const auto t = noisy_table("x", post, 0.2, 6);
    auto u = t;
    u.estimator_name = "y";
    const auto report = stats::compare_all(std::vector<KnowledgeTable>{t, u}, post);
    REQUIRE(report.comparisons.size() == 1);
    CHECK(*report.comparisons[0].t == 0.0);
    CHECK_FALSE(report.comparisons[0].significant);
}

TEST_CASE("undefined cells are kept and excluded from the FDR family") {
    const auto post = random_posttest(30, {"a", "b"}, 7);
    auto flat = noisy_table("flat", post, 0.1, 1);
    for (auto& [key, v] : flat.entries)
        if (key.second == "a") v = 0.5;
    const auto good = noisy_table("good", post, 0.2, 2);
    const auto report = stats::compare_all(std::vector<KnowledgeTable>{flat, good}, post);
    CHECK_FALSE(report.correlations[0].r.has_value());
    CHECK(report.correlations[0].error.find("ZeroVariance") != std::string::npos);
    CHECK_FALSE(report.comparisons[0].t.has_value());
    CHECK_FALSE(report.comparisons[0].significant);
    CHECK(report.comparisons[1].t.has_value());
}

TEST_CASE("pairwise-complete deletion") {
    const auto post = random_posttest(30, {"a"}, 8);
    auto partial = noisy_table("partial", post, 0.2, 3);
    for (int s = 0; s < 10; ++s) partial.entries.erase({"s" + std::to_string(s), "a"});
    const auto full = noisy_table("full", post, 0.2, 4);
    const auto report = stats::compare_all(std::vector<KnowledgeTable>{partial, full}, post);
    CHECK(report.correlations[0].n == 20);
    CHECK(report.correlations[1].n == 30);
    CHECK(report.comparisons[0].n == 20);
    CHECK(report.comparisons[0].df == 17);
}

TEST_CASE("per-skill FDR families") {
    const auto post = random_posttest(50, {"a", "b"}, 9);
    std::vector<KnowledgeTable> tables;
    for (int i = 0; i < 3; ++i) tables.push_back(noisy_table("e" + std::to_string(i), post, 0.1 + 0.3 * i, 20 + i));
    stats::CompareOptions opt;
    opt.family = stats::FdrFamily::PerSkill;
    const auto report = stats::compare_all(tables, post, opt);
    for (const std::string skill : {"a", "b"}) {
        std::vector<double> p;
        std::vector<bool> flags;
        for (const auto& c : report.comparisons)
            if (c.skill == skill) {
                p.push_back(c.p);
                flags.push_back(c.significant);
            }
        CHECK(flags == oracle::benjamini_hochberg(p, 0.05));
    }
}

TEST_CASE("CSV writers") {
    stats::ComparisonReport r;
    r.correlations.push_back({"a", "BKT", 0.5, 10, {}});
    r.correlations.push_back({"a", "PFA", std::nullopt, 2, "TooFewPairs: 2 pairs"});
    stats::PairComparison c;
    c.skill = "a";
    c.estimator_a = "BKT";
    c.estimator_b = "PFA";
    r.comparisons.push_back(c);
    std::ostringstream corr, comp;
    stats::write_correlations_csv(corr, r);
    stats::write_comparisons_csv(comp, r);
    CHECK(corr.str() == "skill,estimator,r,n\na,BKT,0.5,10\na,PFA,NA,2\n");
    CHECK(comp.str() == "skill,estimator_a,estimator_b,t,df,p,significant\na,BKT,PFA,NA,NA,NA,0\n");
}

}  // TEST_SUITE
