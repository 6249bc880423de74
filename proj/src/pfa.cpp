#include "ktrace/pfa.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "csv.hpp"
#include "ktrace/error.hpp"

namespace ktrace::pfa {

namespace {

double softplus(double m) noexcept {
    return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

double linear(const SkillParams& p, double s, double f) noexcept {
    return p.beta + p.gamma * s + p.rho * f;
}

SkillParams from_array(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

template <typename Outcomes>
Trace trace_outcomes(const Outcomes& outcomes, const SkillParams& params) {
    Trace trace;
    trace.predictions.reserve(outcomes.size());
    Counts counts;
    for (bool correct : outcomes) {
        trace.predictions.push_back(predict(counts, params));
        if (correct) ++counts.successes;
        else ++counts.failures;
    }
    trace.final_probability = predict(counts, params);
    return trace;
}

}  // namespace

double logistic(double m) noexcept {
    if (m >= 0.0) return 1.0 / (1.0 + std::exp(-m));
    const double e = std::exp(m);
    return e / (1.0 + e);
}

double predict(const Counts& counts, const SkillParams& params) noexcept {
    return logistic(linear(params, static_cast<double>(counts.successes),
                           static_cast<double>(counts.failures)));
}

Trace trace_student(std::span<const bool> outcomes, const SkillParams& params) {
    return trace_outcomes(outcomes, params);
}

Trace trace_student(const std::vector<bool>& outcomes, const SkillParams& params) {
    return trace_outcomes(outcomes, params);
}

SkillData::SkillData(std::span<const std::vector<bool>> sequences) {
    std::map<std::pair<std::int64_t, std::int64_t>, std::pair<std::int64_t, std::int64_t>> grouped;
    for (const auto& seq : sequences) {
        std::int64_t s = 0, f = 0;
        for (bool correct : seq) {
            auto& cell = grouped[{s, f}];
            ++cell.first;
            if (correct) {
                ++cell.second;
                ++s;
            } else {
                ++f;
            }
            ++observations_;
        }
    }
    cells_.reserve(grouped.size());
    for (const auto& [key, value] : grouped) {
        cells_.push_back({static_cast<double>(key.first), static_cast<double>(key.second),
                          static_cast<double>(value.first), static_cast<double>(value.second)});
    }
}

double SkillData::log_likelihood(const SkillParams& params) const {
    double total = 0.0;
    for (const auto& c : cells_) {
        const double m = linear(params, c.successes, c.failures);
        total += c.correct * m - c.trials * softplus(m);
    }
    return total;
}

std::array<double, 3> SkillData::gradient(const SkillParams& params) const {
    std::array<double, 3> g{0.0, 0.0, 0.0};
    for (const auto& c : cells_) {
        const double residual = c.correct - c.trials * logistic(linear(params, c.successes, c.failures));
        g[0] += residual;
        g[1] += residual * c.successes;
        g[2] += residual * c.failures;
    }
    return g;
}

std::array<double, 9> SkillData::hessian(const SkillParams& params) const {
    std::array<double, 9> h{};
    for (const auto& c : cells_) {
        const double p = logistic(linear(params, c.successes, c.failures));
        const double w = c.trials * p * (1.0 - p);
        const double x[3] = {1.0, c.successes, c.failures};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) h[3 * i + j] -= w * x[i] * x[j];
    }
    return h;
}

// Projected Newton ascent with Armijo backtracking inside the magnitude box.
// The objective is concave, so the Newton direction on the free coordinates
// is an ascent direction whenever the Hessian block is nonsingular; the
// projected gradient is used otherwise.
FitResult fit_skill(std::span<const std::vector<bool>> sequences, const FitOptions& options) {
    const SkillData data(sequences);
    if (data.observations() == 0) throw Error(ErrorKind::EmptyData, "no observations to fit");
    const double cap = options.magnitude_cap;

    auto projected = [cap](const std::array<double, 3>& theta, std::array<double, 3> g) {
        for (int i = 0; i < 3; ++i) {
            if ((theta[i] >= cap && g[i] > 0.0) || (theta[i] <= -cap && g[i] < 0.0)) g[i] = 0.0;
        }
        return g;
    };
    auto max_norm = [](const std::array<double, 3>& g) {
        return std::max({std::abs(g[0]), std::abs(g[1]), std::abs(g[2])});
    };

    std::array<double, 3> theta{0.0, 0.0, 0.0};
    double ll = data.log_likelihood(from_array(theta));
    FitResult result;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        const auto pg = projected(theta, data.gradient(from_array(theta)));
        if (max_norm(pg) < options.tolerance) break;

        std::vector<int> free;
        for (int i = 0; i < 3; ++i) {
            const bool pinned = (theta[i] >= cap && pg[i] == 0.0) || (theta[i] <= -cap && pg[i] == 0.0);
            if (!pinned) free.push_back(i);
        }
        const auto h = data.hessian(from_array(theta));
        const auto nf = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd neg_h(nf, nf);
        Eigen::VectorXd g(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
            g(a) = pg[free[a]];
            for (Eigen::Index b = 0; b < nf; ++b) neg_h(a, b) = -h[3 * free[a] + free[b]];
        }
        std::array<double, 3> direction{0.0, 0.0, 0.0};
        const Eigen::VectorXd newton = neg_h.ldlt().solve(g);
        const bool usable = newton.allFinite() && newton.dot(g) > 0.0;
        for (Eigen::Index a = 0; a < nf; ++a) direction[free[a]] = usable ? newton(a) : g(a);

        bool accepted = false;
        for (double step = 1.0; step > 1e-20; step *= 0.5) {
            std::array<double, 3> cand;
            double predicted = 0.0;
            for (int i = 0; i < 3; ++i) {
                cand[i] = std::clamp(theta[i] + step * direction[i], -cap, cap);
                predicted += pg[i] * (cand[i] - theta[i]);
            }
            const double cand_ll = data.log_likelihood(from_array(cand));
            if (cand_ll >= ll + 1e-4 * predicted && cand != theta) {
                theta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // no representable ascent step remains
    }

    result.params = from_array(theta);
    result.iterations = it;
    result.log_likelihood = ll;
    result.gradient_norm = max_norm(projected(theta, data.gradient(result.params)));
    return result;
}

Params fit(std::span<const StudentSequence> sequences, const SkillCatalog& catalog,
           const FitOptions& options) {
    Params params;
    for (std::size_t k = 0; k < catalog.size(); ++k) {
        std::vector<std::vector<bool>> outcomes;
        for (auto& h : skill_histories(sequences, k)) outcomes.push_back(std::move(h.outcomes));
        if (outcomes.empty())
            throw Error(ErrorKind::EmptyData, "no PFA observations for skill '" + catalog.skill(k) + "'");
        params.emplace(catalog.skill(k), fit_skill(outcomes, options).params);
    }
    return params;
}

void write_params(std::ostream& out, const Params& params) {
    out << "skill_id,beta,gamma,rho\n";
    for (const auto& [skill, p] : params) {
        out << skill << ',' << csv::format_double(p.beta) << ',' << csv::format_double(p.gamma)
            << ',' << csv::format_double(p.rho) << '\n';
    }
}

}  // namespace ktrace::pfa
