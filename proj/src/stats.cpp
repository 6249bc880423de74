#include "ktrace/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>
#include <set>

#include "csv.hpp"
#include "ktrace/error.hpp"

namespace ktrace::stats {

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw Error(ErrorKind::InvalidArgument, "pearson inputs differ in length");
    if (x.size() < 3) throw Error(ErrorKind::TooFewPairs, std::to_string(x.size()) + " pairs");
    // Welford-style co-moment accumulation.
    double mean_x = 0.0, mean_y = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double n = static_cast<double>(i + 1);
        const double dx = x[i] - mean_x;
        const double dy = y[i] - mean_y;
        mean_x += dx / n;
        mean_y += dy / n;
        sxx += dx * (x[i] - mean_x);
        syy += dy * (y[i] - mean_y);
        sxy += dx * (y[i] - mean_y);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw Error(ErrorKind::ZeroVariance, "constant input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

TScore dependent_corr_t(double r_ay, double r_by, double r_ab, int n) {
    if (n < 4) throw Error(ErrorKind::TooFewPairs, "dependent correlation test needs n >= 4, got " + std::to_string(n));
    const int df = n - 3;
    if (r_ay == r_by) return {0.0, df};
    // Symmetric in (r_ay, r_by) term by term, so swapping them negates t exactly.
    const double det = 1.0 - r_ab * r_ab - (r_ay * r_ay + r_by * r_by) + 2.0 * r_ab * (r_ay * r_by);
    if (!(det > 0.0))
        throw Error(ErrorKind::SingularCorrelationMatrix, "determinant " + csv::format_double(det));
    const double t = (r_ay - r_by) * std::sqrt(static_cast<double>(df) * (1.0 + r_ab) / (2.0 * det));
    return {t, df};
}

double p_from_t(double t, int df) {
    if (df < 1) throw Error(ErrorKind::InvalidArgument, "df must be >= 1");
    if (std::isnan(t)) return 1.0;
    const double v = static_cast<double>(df);
    const double x = v / (v + t * t);
    return std::clamp(boost::math::ibeta(0.5 * v, 0.5, x), 0.0, 1.0);
}

namespace {

std::vector<bool> step_up(std::span<const double> p_values, double q) {
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::size_t k = 0;
    for (std::size_t rank = m; rank >= 1; --rank) {
        if (p_values[order[rank - 1]] <= static_cast<double>(rank) / static_cast<double>(m) * q) {
            k = rank;
            break;
        }
    }
    std::vector<bool> flags(m, false);
    for (std::size_t i = 0; i < k; ++i) flags[order[i]] = true;
    return flags;
}

void check_q(double q) {
    if (!(q > 0.0 && q < 1.0)) throw Error(ErrorKind::InvalidArgument, "FDR level must lie in (0, 1)");
}

}  // namespace

std::vector<bool> benjamini_hochberg(std::span<const double> p_values, double q) {
    check_q(q);
    return step_up(p_values, q);
}

std::vector<bool> benjamini_yekutieli(std::span<const double> p_values, double q) {
    check_q(q);
    double harmonic = 0.0;
    for (std::size_t i = 1; i <= p_values.size(); ++i) harmonic += 1.0 / static_cast<double>(i);
    return step_up(p_values, harmonic > 0.0 ? q / harmonic : q);
}

ComparisonReport compare_all(std::span<const KnowledgeTable> tables, const PosttestScores& posttest,
                             const CompareOptions& options) {
    if (tables.empty()) throw Error(ErrorKind::InvalidArgument, "no estimators to compare");
    check_q(options.q);

    ComparisonReport report;
    report.options = options;
    std::set<std::string> skills;
    for (const auto& [key, score] : posttest.entries()) skills.insert(key.second);
    for (const auto& table : tables) {
        report.estimators.push_back(table.estimator_name);
        for (const auto& [key, value] : table.entries) skills.insert(key.second);
    }
    report.skills.assign(skills.begin(), skills.end());

    for (const auto& skill : report.skills) {
        // Students with a posttest subscore on this skill, in id order.
        std::vector<std::pair<std::string, double>> tested;
        for (const auto& [key, score] : posttest.entries())
            if (key.second == skill) tested.emplace_back(key.first, score);

        for (const auto& table : tables) {
            std::vector<double> est, post;
            for (const auto& [student, score] : tested) {
                if (auto e = table.find(student, skill)) {
                    est.push_back(*e);
                    post.push_back(score);
                }
            }
            CorrelationResult cr{skill, table.estimator_name, std::nullopt, est.size(), {}};
            try {
                cr.r = pearson(est, post);
            } catch (const Error& e) {
                cr.error = e.what();
            }
            report.correlations.push_back(std::move(cr));
        }

        for (std::size_t a = 0; a < tables.size(); ++a) {
            for (std::size_t b = a + 1; b < tables.size(); ++b) {
                std::vector<double> xa, xb, y;
                for (const auto& [student, score] : tested) {
                    auto ea = tables[a].find(student, skill);
                    auto eb = tables[b].find(student, skill);
                    if (ea && eb) {
                        xa.push_back(*ea);
                        xb.push_back(*eb);
                        y.push_back(score);
                    }
                }
                PairComparison pc;
                pc.skill = skill;
                pc.estimator_a = tables[a].estimator_name;
                pc.estimator_b = tables[b].estimator_name;
                pc.n = y.size();
                try {
                    const double r_ay = pearson(xa, y);
                    const double r_by = pearson(xb, y);
                    const double r_ab = pearson(xa, xb);
                    const TScore ts = dependent_corr_t(r_ay, r_by, r_ab, static_cast<int>(y.size()));
                    pc.t = ts.t;
                    pc.df = ts.df;
                    pc.p = p_from_t(ts.t, ts.df);
                } catch (const Error& e) {
                    pc.error = e.what();
                }
                report.comparisons.push_back(std::move(pc));
            }
        }
    }

    // FDR control over the defined comparisons of each family.
    auto control = [&](const std::vector<std::size_t>& members) {
        std::vector<double> p;
        for (std::size_t i : members) p.push_back(report.comparisons[i].p);
        const auto flags = options.procedure == FdrProcedure::BenjaminiHochberg
                               ? benjamini_hochberg(p, options.q)
                               : benjamini_yekutieli(p, options.q);
        for (std::size_t k = 0; k < members.size(); ++k) report.comparisons[members[k]].significant = flags[k];
    };
    if (options.family == FdrFamily::Global) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < report.comparisons.size(); ++i)
            if (report.comparisons[i].t) members.push_back(i);
        control(members);
    } else {
        for (const auto& skill : report.skills) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < report.comparisons.size(); ++i)
                if (report.comparisons[i].t && report.comparisons[i].skill == skill) members.push_back(i);
            control(members);
        }
    }
    return report;
}

void write_correlations_csv(std::ostream& out, const ComparisonReport& report) {
    out << "skill,estimator,r,n\n";
    for (const auto& c : report.correlations)
        out << c.skill << ',' << c.estimator << ',' << (c.r ? csv::format_double(*c.r) : "NA") << ',' << c.n
            << '\n';
}

void write_comparisons_csv(std::ostream& out, const ComparisonReport& report) {
    out << "skill,estimator_a,estimator_b,t,df,p,significant\n";
    for (const auto& c : report.comparisons) {
        out << c.skill << ',' << c.estimator_a << ',' << c.estimator_b << ',';
        if (c.t)
            out << csv::format_double(*c.t) << ',' << c.df << ',' << csv::format_double(c.p) << ','
                << (c.significant ? 1 : 0);
        else
            out << "NA,NA,NA,0";
        out << '\n';
    }
}

}  // namespace ktrace::stats
