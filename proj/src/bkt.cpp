#include "ktrace/bkt.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "csv.hpp"
#include "ktrace/error.hpp"

namespace ktrace::bkt {

bool Bounds::contains(const Params& p) const noexcept {
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    return in(p.p_init, floor, ceiling) && in(p.p_transit, floor, ceiling) &&
           in(p.p_guess, floor, guess_slip_ceiling) && in(p.p_slip, floor, guess_slip_ceiling);
}

Params Bounds::clamp(Params p) const noexcept {
    p.p_init = std::clamp(p.p_init, floor, ceiling);
    p.p_transit = std::clamp(p.p_transit, floor, ceiling);
    p.p_guess = std::clamp(p.p_guess, floor, guess_slip_ceiling);
    p.p_slip = std::clamp(p.p_slip, floor, guess_slip_ceiling);
    return p;
}

double predict_correct(double p_known, const Params& params) noexcept {
    return p_known * (1.0 - params.p_slip) + (1.0 - p_known) * params.p_guess;
}

double update_knowledge(double p_known, bool observed_correct, const Params& params) {
    const double known = observed_correct ? p_known * (1.0 - params.p_slip) : p_known * params.p_slip;
    const double unknown = observed_correct ? (1.0 - p_known) * params.p_guess
                                            : (1.0 - p_known) * (1.0 - params.p_guess);
    const double denom = known + unknown;
    if (denom == 0.0)
        throw Error(ErrorKind::DegenerateDenominator,
                    "observation has zero probability under the current parameters");
    const double posterior = known / denom;
    return posterior + (1.0 - posterior) * params.p_transit;
}

namespace {

template <typename Outcomes>
Trace trace_outcomes(const Outcomes& outcomes, const Params& params) {
    Trace trace;
    trace.reserve(outcomes.size());
    double p_known = params.p_init;
    for (bool correct : outcomes) {
        TraceStep step;
        step.p_known_before = p_known;
        step.p_correct_pred = predict_correct(p_known, params);
        p_known = update_knowledge(p_known, correct, params);
        step.p_known_after = p_known;
        trace.push_back(step);
    }
    return trace;
}

}  // namespace

Trace trace_student(std::span<const bool> outcomes, const Params& params) {
    return trace_outcomes(outcomes, params);
}

Trace trace_student(const std::vector<bool>& outcomes, const Params& params) {
    return trace_outcomes(outcomes, params);
}

namespace {

// Prefix tree over outcome sequences. Students sharing a response prefix
// share the forward computation for it, and the log-likelihood becomes a
// count-weighted sum over nodes. Parents always precede children.
class OutcomeTrie {
public:
    explicit OutcomeTrie(std::span<const std::vector<bool>> sequences) {
        nodes_.push_back({0, false, 0, {kNone, kNone}});
        for (const auto& seq : sequences) {
            std::size_t at = 0;
            for (bool outcome : seq) {
                auto& slot = nodes_[at].child[outcome ? 1 : 0];
                if (slot == kNone) {
                    slot = nodes_.size();
                    nodes_.push_back({at, outcome, 0, {kNone, kNone}});
                }
                at = nodes_[at].child[outcome ? 1 : 0];
                ++nodes_[at].count;
                ++observations_;
            }
        }
        after_.resize(nodes_.size());
    }

    std::size_t observations() const noexcept { return observations_; }

    double log_likelihood(const Params& p) {
        const double slip = p.p_slip, guess = p.p_guess, transit = p.p_transit;
        after_[0] = p.p_init;
        double total = 0.0;
        for (std::size_t n = 1; n < nodes_.size(); ++n) {
            const Node& node = nodes_[n];
            const double known = after_[node.parent];
            const double pc = known * (1.0 - slip) + (1.0 - known) * guess;
            double posterior;
            if (node.outcome) {
                total += static_cast<double>(node.count) * std::log(pc);
                posterior = known * (1.0 - slip) / pc;
            } else {
                total += static_cast<double>(node.count) * std::log1p(-pc);
                posterior = known * slip / (1.0 - pc);
            }
            after_[n] = posterior + (1.0 - posterior) * transit;
        }
        return total;
    }

private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    struct Node {
        std::size_t parent;
        bool outcome;
        std::size_t count;
        std::array<std::size_t, 2> child;
    };
    std::vector<Node> nodes_;
    std::vector<double> after_;
    std::size_t observations_ = 0;
};

std::vector<double> grid_values(double lo, double hi, double step) {
    std::vector<double> values;
    for (int k = 0;; ++k) {
        const double v = lo + k * step;
        if (v >= hi - 1e-12) break;
        values.push_back(v);
    }
    values.push_back(hi);
    return values;
}

double& coordinate(Params& p, int c) {
    switch (c) {
        case 0: return p.p_init;
        case 1: return p.p_transit;
        case 2: return p.p_guess;
        default: return p.p_slip;
    }
}

}  // namespace

double log_likelihood(std::span<const std::vector<bool>> sequences, const Params& params) {
    OutcomeTrie trie(sequences);
    return trie.log_likelihood(params);
}

Params fit_skill(std::span<const std::vector<bool>> sequences, const FitOptions& options) {
    OutcomeTrie trie(sequences);
    if (trie.observations() == 0) throw Error(ErrorKind::EmptyData, "no observations to fit");
    if (!(options.grid_step > 0.0) || !(options.refine_tolerance > 0.0))
        throw Error(ErrorKind::InvalidArgument, "grid step and refine tolerance must be positive");
    const Bounds& b = options.bounds;

    const auto wide = grid_values(b.floor, b.ceiling, options.grid_step);
    const auto narrow = grid_values(b.floor, b.guess_slip_ceiling, options.grid_step);

    Params best;
    double best_ll = -INFINITY;
    for (double init : wide)
        for (double transit : wide)
            for (double guess : narrow)
                for (double slip : narrow) {
                    const Params cand{init, transit, guess, slip};
                    const double ll = trie.log_likelihood(cand);
                    if (ll > best_ll) {
                        best_ll = ll;
                        best = cand;
                    }
                }

    for (double step = options.grid_step; step >= options.refine_tolerance; step *= 0.5) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (int c = 0; c < 4; ++c) {
                for (double dir : {-1.0, 1.0}) {
                    Params cand = best;
                    coordinate(cand, c) += dir * step;
                    cand = b.clamp(cand);
                    if (cand == best) continue;
                    const double ll = trie.log_likelihood(cand);
                    if (ll > best_ll) {
                        best_ll = ll;
                        best = cand;
                        improved = true;
                    }
                }
            }
        }
    }
    return best;
}

SkillParams fit_all(std::span<const StudentSequence> sequences, const SkillCatalog& catalog,
                    const FitOptions& options) {
    SkillParams fitted;
    for (std::size_t k = 0; k < catalog.size(); ++k) {
        std::vector<std::vector<bool>> outcomes;
        for (auto& h : skill_histories(sequences, k)) outcomes.push_back(std::move(h.outcomes));
        try {
            fitted.emplace(catalog.skill(k), fit_skill(outcomes, options));
        } catch (const Error& e) {
            throw Error(e.kind(), "bkt fit of skill '" + catalog.skill(k) + "': " + e.detail());
        }
    }
    return fitted;
}

std::map<StudentSkill, Trace> trace_all(std::span<const StudentSequence> sequences,
                                        const SkillCatalog& catalog, const SkillParams& params) {
    std::map<StudentSkill, Trace> traces;
    for (std::size_t k = 0; k < catalog.size(); ++k) {
        const auto& skill = catalog.skill(k);
        auto it = params.find(skill);
        if (it == params.end())
            throw Error(ErrorKind::UnknownSkill, "no BKT parameters for skill '" + skill + "'");
        for (const auto& h : skill_histories(sequences, k))
            traces.emplace(StudentSkill{h.student_id, skill}, trace_student(h.outcomes, it->second));
    }
    return traces;
}

void write_params(std::ostream& out, const SkillParams& params) {
    out << "skill_id,p_init,p_transit,p_guess,p_slip\n";
    for (const auto& [skill, p] : params) {
        out << skill << ',' << csv::format_double(p.p_init) << ','
            << csv::format_double(p.p_transit) << ',' << csv::format_double(p.p_guess) << ','
            << csv::format_double(p.p_slip) << '\n';
    }
}

}  // namespace ktrace::bkt
