#pragma once

// Correlating knowledge estimates with posttest subscores and comparing
// estimators pairwise with a dependent-correlations t test under
// false-discovery-rate control.

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ktrace/dataset.hpp"
#include "ktrace/estimator.hpp"

namespace ktrace::stats {

// Product-moment correlation. Throws TooFewPairs (n < 3) or ZeroVariance.
double pearson(std::span<const double> x, std::span<const double> y);

struct TScore {
    double t = 0.0;
    int df = 0;
};

// Hotelling's t for two correlations that share the variable y:
//
//   t = (r_ay - r_by) * sqrt((n - 3) * (1 + r_ab) / (2 * |R|))
//   |R| = 1 - r_ay^2 - r_by^2 - r_ab^2 + 2 * r_ay * r_by * r_ab
//
// with n - 3 degrees of freedom. Positive when `a` correlates more strongly.
// Equal correlations give t = 0 whatever r_ab is. Throws TooFewPairs for
// n < 4 and SingularCorrelationMatrix when |R| <= 0.
TScore dependent_corr_t(double r_ay, double r_by, double r_ab, int n);

// Two-tailed p-value of Student's t: I_{df / (df + t^2)}(df / 2, 1 / 2).
double p_from_t(double t, int df);

// Step-up FDR control; flags are returned in input order.
std::vector<bool> benjamini_hochberg(std::span<const double> p_values, double q);
// Benjamini-Yekutieli: step-up at q / H_m, valid under arbitrary dependence.
std::vector<bool> benjamini_yekutieli(std::span<const double> p_values, double q);

enum class FdrFamily { Global, PerSkill };
enum class FdrProcedure { BenjaminiHochberg, BenjaminiYekutieli };

struct CompareOptions {
    double q = 0.05;
    FdrFamily family = FdrFamily::Global;
    FdrProcedure procedure = FdrProcedure::BenjaminiHochberg;
};

struct CorrelationResult {
    std::string skill;
    std::string estimator;
    std::optional<double> r;  // empty when the correlation is undefined
    std::size_t n = 0;
    std::string error;
};

struct PairComparison {
    std::string skill;
    std::string estimator_a;
    std::string estimator_b;
    std::optional<double> t;  // empty when the test is undefined
    int df = 0;
    double p = 1.0;
    bool significant = false;
    std::size_t n = 0;
    std::string error;
};

struct ComparisonReport {
    std::vector<std::string> estimators;
    std::vector<std::string> skills;
    std::vector<CorrelationResult> correlations;  // skill-major, estimator order
    std::vector<PairComparison> comparisons;      // skill-major, (i < j) pairs
    CompareOptions options;
};

// Per skill: one correlation per estimator and one comparison per unordered
// estimator pair, on pairwise-complete students. Undefined cells are kept
// with an error string instead of aborting; FDR control runs over the
// defined comparisons. Throws InvalidArgument without tables.
ComparisonReport compare_all(std::span<const KnowledgeTable> tables, const PosttestScores& posttest,
                             const CompareOptions& options = {});

// skill,estimator,r,n
void write_correlations_csv(std::ostream& out, const ComparisonReport& report);
// skill,estimator_a,estimator_b,t,df,p,significant
void write_comparisons_csv(std::ostream& out, const ComparisonReport& report);

}  // namespace ktrace::stats
