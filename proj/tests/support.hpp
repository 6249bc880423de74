#pragma once

// Independent reference implementations and helpers shared by the unit and
// acceptance tests. Nothing here calls into the code it is used to check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ktrace/bkt.hpp"
#include "ktrace/dataset.hpp"
#include "ktrace/param_view.hpp"
#include "ktrace/rng.hpp"

namespace oracle {

// P(obs_t correct | obs_1..t-1) for every t, by summing over all 2^t latent
// knowledge paths.
inline std::vector<double> bkt_enumerate(const std::vector<bool>& outcomes, const ktrace::bkt::Params& p) {
    auto joint = [&](std::size_t len, bool last_correct) {
        // Probability of outcomes[0..len-2] followed by `last_correct` at len-1.
        double total = 0.0;
        for (std::uint32_t path = 0; path < (1u << len); ++path) {
            double prob = 1.0;
            for (std::size_t i = 0; i < len; ++i) {
                const bool known = (path >> i) & 1u;
                if (i == 0) {
                    prob *= known ? p.p_init : 1.0 - p.p_init;
                } else {
                    const bool was = (path >> (i - 1)) & 1u;
                    if (was) prob *= known ? 1.0 : 0.0;
                    else prob *= known ? p.p_transit : 1.0 - p.p_transit;
                }
                const bool obs = i + 1 == len ? last_correct : outcomes[i];
                const double pc = known ? 1.0 - p.p_slip : p.p_guess;
                prob *= obs ? pc : 1.0 - pc;
            }
            total += prob;
        }
        return total;
    };
    std::vector<double> out;
    for (std::size_t t = 1; t <= outcomes.size(); ++t) {
        const double c = joint(t, true);
        const double w = joint(t, false);
        out.push_back(c / (c + w));
    }
    return out;
}

// Textbook two-pass correlation.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Benjamini-Hochberg by definition, O(m^2): the rejection threshold is the
// largest p_j with p_j <= rank(p_j) * q / m, rank counting ties inclusively.
inline std::vector<bool> benjamini_hochberg(const std::vector<double>& p, double q) {
    const std::size_t m = p.size();
    double threshold = -1.0;
    for (std::size_t j = 0; j < m; ++j) {
        std::size_t rank = 0;
        for (std::size_t l = 0; l < m; ++l)
            if (p[l] <= p[j]) ++rank;
        if (p[j] <= static_cast<double>(rank) * q / static_cast<double>(m)) threshold = std::max(threshold, p[j]);
    }
    std::vector<bool> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = p[i] <= threshold;
    return out;
}

// Two-tailed Student-t p-values with closed forms.
inline double p_df1(double t) { return 1.0 - 2.0 * std::atan(std::abs(t)) / std::numbers::pi; }
inline double p_df2(double t) { return 1.0 - std::abs(t) / std::sqrt(2.0 + t * t); }

// Hotelling's t with |R| from an explicit 3x3 determinant.
inline double hotelling_t(double r_ay, double r_by, double r_ab, int n) {
    Eigen::Matrix3d R;
    R << 1.0, r_ab, r_ay, r_ab, 1.0, r_by, r_ay, r_by, 1.0;
    return (r_ay - r_by) * std::sqrt((n - 3) * (1.0 + r_ab) / (2.0 * R.determinant()));
}

// Rank-sum AUC with midranks for ties.
inline double auc(std::vector<std::pair<double, bool>> scored) {
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double pos = 0, neg = 0, rank_sum = 0;
    for (std::size_t i = 0; i < scored.size();) {
        std::size_t j = i;
        while (j < scored.size() && scored[j].first == scored[i].first) ++j;
        const double mid = (static_cast<double>(i + j) + 1.0) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (scored[k].second) {
                rank_sum += mid;
                ++pos;
            } else {
                ++neg;
            }
        }
        i = j;
    }
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

// Worst relative error, per named parameter block, between an analytic
// gradient and central differences of `loss` with step eps:
//   |a - n| / max(|a| + |n|, floor)
template <typename Model, typename Loss>
std::vector<std::pair<std::string, double>> gradient_check(Model model, const Model& analytic, Loss&& loss,
                                                           double eps = 1e-5, double floor = 1e-7) {
    std::vector<std::pair<std::string, double>> worst;
    auto params = model.parameters();
    const auto grads = analytic.parameters();
    for (std::size_t b = 0; b < params.size(); ++b) {
        double block_worst = 0.0;
        for (std::size_t i = 0; i < params[b].values.size(); ++i) {
            double& v = params[b].values[i];
            const double saved = v;
            v = saved + eps;
            const double up = loss(model);
            v = saved - eps;
            const double down = loss(model);
            v = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = grads[b].values[i];
            block_worst = std::max(block_worst, std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor));
        }
        worst.emplace_back(std::string(params[b].name), block_worst);
    }
    return worst;
}

}  // namespace oracle

namespace fixture {

// Random student sequences over `skills` skills.
inline std::vector<ktrace::StudentSequence> random_sequences(std::size_t students, std::size_t skills,
                                                            std::size_t min_len, std::size_t max_len,
                                                            std::uint64_t seed) {
    ktrace::Rng rng(seed);
    std::vector<ktrace::StudentSequence> out;
    for (std::size_t s = 0; s < students; ++s) {
        ktrace::StudentSequence seq;
        seq.student_id = "s" + std::to_string(s);
        const std::size_t len = min_len + static_cast<std::size_t>(rng.below(max_len - min_len + 1));
        for (std::size_t t = 0; t < len; ++t) {
            const auto k = static_cast<std::size_t>(rng.below(skills));
            seq.steps.push_back({k, "k" + std::to_string(k), "i" + std::to_string(t), rng.bernoulli(0.6)});
        }
        out.push_back(std::move(seq));
    }
    return out;
}

// Outcomes drawn from the BKT generative process with the given parameters.
inline std::vector<std::vector<bool>> bkt_cohort(const ktrace::bkt::Params& p, std::size_t students,
                                                 std::size_t opportunities, std::uint64_t seed) {
    ktrace::Rng rng(seed);
    std::vector<std::vector<bool>> out;
    for (std::size_t s = 0; s < students; ++s) {
        bool known = rng.bernoulli(p.p_init);
        std::vector<bool> seq;
        for (std::size_t t = 0; t < opportunities; ++t) {
            seq.push_back(rng.bernoulli(known ? 1.0 - p.p_slip : p.p_guess));
            if (!known) known = rng.bernoulli(p.p_transit);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

// Outcomes drawn from the PFA logistic model (beta, gamma, rho).
inline std::vector<std::vector<bool>> pfa_cohort(double beta, double gamma, double rho, std::size_t students,
                                                 std::size_t opportunities, std::uint64_t seed) {
    ktrace::Rng rng(seed);
    std::vector<std::vector<bool>> out;
    for (std::size_t s = 0; s < students; ++s) {
        double successes = 0, failures = 0;
        std::vector<bool> seq;
        for (std::size_t t = 0; t < opportunities; ++t) {
            const bool ok = rng.bernoulli(1.0 / (1.0 + std::exp(-(beta + gamma * successes + rho * failures))));
            seq.push_back(ok);
            (ok ? successes : failures) += 1;
        }
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace fixture
