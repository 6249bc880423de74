#include "ktrace/dkt.hpp"

#include <cmath>
#include <numeric>

#include "checkpoint.hpp"
#include "ktrace/error.hpp"
#include "ktrace/rng.hpp"

namespace ktrace::dkt {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd sigmoid(const VectorXd& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

double softplus(double m) { return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }

// Cross-entropy of logistic(logit) against the binary outcome.
double cross_entropy(double logit, bool outcome) { return softplus(logit) - (outcome ? logit : 0.0); }

double sign(double x) { return (x > 0.0) - (x < 0.0); }

struct ForwardCache {
    MatrixXd in_gate, forget_gate, out_gate, candidate;  // H x T
    MatrixXd cell;                                       // H x (T+1), column 0 is zero
    MatrixXd cell_tanh;                                  // H x T
    MatrixXd hidden;                                     // H x (T+1), column 0 is zero
    MatrixXd logits;                                     // S x (T+1)
    MatrixXd probs;                                      // S x (T+1)
};

ForwardCache run_forward(const Model& m, const StudentSequence& seq) {
    const auto S = static_cast<Eigen::Index>(m.num_skills());
    const Eigen::Index H = m.hidden_size();
    const auto T = static_cast<Eigen::Index>(seq.steps.size());
    ForwardCache c;
    c.in_gate.resize(H, T);
    c.forget_gate.resize(H, T);
    c.out_gate.resize(H, T);
    c.candidate.resize(H, T);
    c.cell = MatrixXd::Zero(H, T + 1);
    c.cell_tanh.resize(H, T);
    c.hidden = MatrixXd::Zero(H, T + 1);

    VectorXd z(4 * H);
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto& step = seq.steps[static_cast<std::size_t>(t)];
        if (static_cast<Eigen::Index>(step.skill) >= S)
            throw Error(ErrorKind::IndexOutOfRange, "skill index " + std::to_string(step.skill));
        const Eigen::Index col = static_cast<Eigen::Index>(step.skill) + (step.correct ? S : 0);
        z.noalias() = m.recurrent_weights * c.hidden.col(t);
        z += m.input_weights.col(col) + m.gate_bias;
        c.in_gate.col(t) = sigmoid(z.segment(0, H));
        c.forget_gate.col(t) = sigmoid(z.segment(H, H));
        c.out_gate.col(t) = sigmoid(z.segment(2 * H, H));
        c.candidate.col(t) = z.segment(3 * H, H).array().tanh().matrix();
        c.cell.col(t + 1) = c.forget_gate.col(t).cwiseProduct(c.cell.col(t)) +
                            c.in_gate.col(t).cwiseProduct(c.candidate.col(t));
        c.cell_tanh.col(t) = c.cell.col(t + 1).array().tanh().matrix();
        c.hidden.col(t + 1) = c.out_gate.col(t).cwiseProduct(c.cell_tanh.col(t));
    }
    c.logits = m.output_weights * c.hidden;
    c.logits.colwise() += m.output_bias;
    c.probs = (1.0 + (-c.logits.array()).exp()).inverse().matrix();
    return c;
}

// Adds scale * (sequence loss sums) to `terms` and, when `grad` is set,
// scale * gradient to it. Returns the scaled total.
double accumulate(const Model& m, const StudentSequence& seq, const Config& cfg, double scale,
                  Model* grad, LossTerms* terms) {
    const auto S = static_cast<Eigen::Index>(m.num_skills());
    const Eigen::Index H = m.hidden_size();
    const auto T = static_cast<Eigen::Index>(seq.steps.size());
    if (T == 0) return 0.0;
    const ForwardCache c = run_forward(m, seq);
    const double inv_s = 1.0 / static_cast<double>(S);

    double next = 0.0, current = 0.0, w1 = 0.0, w2 = 0.0;
    MatrixXd d_logits;
    MatrixXd d_probs;
    if (grad) {
        d_logits = MatrixXd::Zero(S, T + 1);
        d_probs = MatrixXd::Zero(S, T + 1);
    }

    for (Eigen::Index t = 0; t < T; ++t) {
        const auto& step = seq.steps[static_cast<std::size_t>(t)];
        const auto k = static_cast<Eigen::Index>(step.skill);
        const double y = step.correct ? 1.0 : 0.0;
        // y_t predicts step t+1 (0-based step t); y_{t+1} reconstructs it.
        next += cross_entropy(c.logits(k, t), step.correct);
        current += cross_entropy(c.logits(k, t + 1), step.correct);
        const auto delta = (c.probs.col(t + 1) - c.probs.col(t)).eval();
        w1 += delta.cwiseAbs().sum() * inv_s;
        w2 += delta.squaredNorm() * inv_s;
        if (grad) {
            d_logits(k, t) += scale * (c.probs(k, t) - y);
            d_logits(k, t + 1) += scale * cfg.lambda_r * (c.probs(k, t + 1) - y);
            const VectorXd g_w = scale * inv_s *
                                 (cfg.lambda_w1 * delta.unaryExpr([](double v) { return sign(v); }) +
                                  2.0 * cfg.lambda_w2 * delta);
            d_probs.col(t + 1) += g_w;
            d_probs.col(t) -= g_w;
        }
    }
    const double total = next + cfg.lambda_r * current + cfg.lambda_w1 * w1 + cfg.lambda_w2 * w2;
    if (terms) {
        terms->next += scale * next;
        terms->current += scale * current;
        terms->w1 += scale * w1;
        terms->w2 += scale * w2;
        terms->total += scale * total;
    }
    if (!grad) return scale * total;

    d_logits.array() += d_probs.array() * c.probs.array() * (1.0 - c.probs.array());
    grad->output_bias += d_logits.rowwise().sum();
    grad->output_weights.noalias() += d_logits * c.hidden.transpose();
    const MatrixXd d_hidden_out = m.output_weights.transpose() * d_logits;  // H x (T+1)

    VectorXd dh_next = VectorXd::Zero(H);
    VectorXd dc_next = VectorXd::Zero(H);
    VectorXd dz(4 * H);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
        const auto& step = seq.steps[static_cast<std::size_t>(t)];
        const Eigen::Index col = static_cast<Eigen::Index>(step.skill) + (step.correct ? S : 0);
        const VectorXd dh = d_hidden_out.col(t + 1) + dh_next;
        const auto i = c.in_gate.col(t).array();
        const auto f = c.forget_gate.col(t).array();
        const auto o = c.out_gate.col(t).array();
        const auto g = c.candidate.col(t).array();
        const auto tc = c.cell_tanh.col(t).array();
        const VectorXd dc = (dh.array() * o * (1.0 - tc * tc)).matrix() + dc_next;
        dz.segment(0, H) = (dc.array() * g * i * (1.0 - i)).matrix();
        dz.segment(H, H) = (dc.array() * c.cell.col(t).array() * f * (1.0 - f)).matrix();
        dz.segment(2 * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
        dz.segment(3 * H, H) = (dc.array() * i * (1.0 - g * g)).matrix();

        grad->input_weights.col(col) += dz;
        grad->recurrent_weights.noalias() += dz * c.hidden.col(t).transpose();
        grad->gate_bias += dz;
        dh_next.noalias() = m.recurrent_weights.transpose() * dz;
        dc_next = (dc.array() * f).matrix();
    }
    return scale * total;
}

std::size_t total_steps(std::span<const StudentSequence> sequences) {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.steps.size();
    return n;
}

double global_norm(const Model& grad) {
    double sq = 0.0;
    for (const auto& p : grad.parameters())
        for (double v : p.values) sq += v * v;
    return std::sqrt(sq);
}

}  // namespace

void Config::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, "dkt: " + what); };
    if (hidden_size < 1) fail("hidden_size must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (epochs < 1) fail("epochs must be >= 1");
    if (!(lambda_r >= 0.0) || !(lambda_w1 >= 0.0) || !(lambda_w2 >= 0.0))
        fail("regularisation weights must be non-negative");
    if (!(max_grad_norm > 0.0)) fail("max_grad_norm must be positive");
}

Model::Model(std::size_t num_skills, int hidden_size)
    : input_weights(MatrixXd::Zero(4 * hidden_size, 2 * static_cast<Eigen::Index>(num_skills))),
      recurrent_weights(MatrixXd::Zero(4 * hidden_size, hidden_size)),
      gate_bias(VectorXd::Zero(4 * hidden_size)),
      output_weights(MatrixXd::Zero(static_cast<Eigen::Index>(num_skills), hidden_size)),
      output_bias(VectorXd::Zero(static_cast<Eigen::Index>(num_skills))),
      num_skills_(num_skills),
      hidden_size_(hidden_size) {}

Model Model::initialize(std::size_t num_skills, int hidden_size, std::uint64_t seed) {
    if (num_skills == 0 || hidden_size < 1)
        throw Error(ErrorKind::InvalidArgument, "dkt model needs at least one skill and hidden unit");
    Model m(num_skills, hidden_size);
    Rng rng(seed);
    const double gate_bound = 1.0 / std::sqrt(static_cast<double>(2 * num_skills + hidden_size));
    const double out_bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    auto fill = [&rng](MatrixXd& w, double bound) {
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    };
    fill(m.input_weights, gate_bound);
    fill(m.recurrent_weights, gate_bound);
    fill(m.output_weights, out_bound);
    m.gate_bias.segment(hidden_size, hidden_size).setOnes();
    return m;
}

std::vector<ParamView> Model::parameters() {
    auto view = [](std::string_view name, auto& x) {
        return ParamView{name, x.rows(), x.cols(), std::span<double>(x.data(), static_cast<std::size_t>(x.size()))};
    };
    return {view("input_weights", input_weights), view("recurrent_weights", recurrent_weights),
            view("gate_bias", gate_bias), view("output_weights", output_weights),
            view("output_bias", output_bias)};
}

std::vector<ConstParamView> Model::parameters() const {
    auto view = [](std::string_view name, const auto& x) {
        return ConstParamView{name, x.rows(), x.cols(),
                              std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))};
    };
    return {view("input_weights", input_weights), view("recurrent_weights", recurrent_weights),
            view("gate_bias", gate_bias), view("output_weights", output_weights),
            view("output_bias", output_bias)};
}

void Model::set_zero() {
    for (auto& p : parameters()) std::fill(p.values.begin(), p.values.end(), 0.0);
}

bool Model::all_finite() const {
    for (const auto& p : parameters())
        for (double v : p.values)
            if (!std::isfinite(v)) return false;
    return true;
}

bool operator==(const Model& a, const Model& b) {
    if (a.num_skills_ != b.num_skills_ || a.hidden_size_ != b.hidden_size_) return false;
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (!std::equal(pa[i].values.begin(), pa[i].values.end(), pb[i].values.begin())) return false;
    }
    return true;
}

Eigen::VectorXd encode_input(std::size_t skill, bool correct, std::size_t num_skills) {
    if (skill >= num_skills)
        throw Error(ErrorKind::IndexOutOfRange,
                    "skill index " + std::to_string(skill) + " with " + std::to_string(num_skills) + " skills");
    VectorXd x = VectorXd::Zero(2 * static_cast<Eigen::Index>(num_skills));
    x(static_cast<Eigen::Index>(skill + (correct ? num_skills : 0))) = 1.0;
    return x;
}

Eigen::VectorXd initial_prediction(const Model& model) { return sigmoid(model.output_bias); }

Eigen::MatrixXd forward(const Model& model, const StudentSequence& sequence) {
    const ForwardCache c = run_forward(model, sequence);
    return c.probs.rightCols(c.probs.cols() - 1).transpose();
}

LossTerms loss(const Model& model, std::span<const StudentSequence> sequences, const Config& config) {
    LossTerms terms;
    const std::size_t n = total_steps(sequences);
    if (n == 0) return terms;
    const double scale = 1.0 / static_cast<double>(n);
    for (const auto& seq : sequences) accumulate(model, seq, config, scale, nullptr, &terms);
    return terms;
}

double loss_gradient(const Model& model, std::span<const StudentSequence> sequences,
                     const Config& config, Model& gradient) {
    gradient = Model(model.num_skills(), model.hidden_size());
    const std::size_t n = total_steps(sequences);
    if (n == 0) return 0.0;
    const double scale = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (const auto& seq : sequences) total += accumulate(model, seq, config, scale, &gradient, nullptr);
    return total;
}

TrainResult train(std::span<const StudentSequence> sequences, std::size_t num_skills,
                  const Config& config) {
    config.validate();
    const std::size_t n = total_steps(sequences);
    if (n == 0) throw Error(ErrorKind::EmptyData, "dkt training corpus has no steps");

    TrainResult result;
    result.model = Model::initialize(num_skills, config.hidden_size, config.seed);
    Model& m = result.model;
    result.initial_loss = loss(m, sequences, config).total;

    std::vector<std::size_t> order(sequences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(config.seed, 1));
    rng.shuffle(std::span<std::size_t>(order));

    Model grad(num_skills, config.hidden_size);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double running = 0.0;
        for (std::size_t idx : order) {
            const auto& seq = sequences[idx];
            if (seq.steps.empty()) continue;
            grad.set_zero();
            const double steps = static_cast<double>(seq.steps.size());
            const double l = accumulate(m, seq, config, 1.0 / steps, &grad, nullptr);
            if (!std::isfinite(l))
                throw Error(ErrorKind::NonFiniteLoss, "dkt diverged in epoch " + std::to_string(epoch) +
                                                          " on student '" + seq.student_id + "'");
            running += l * steps;
            const double norm = global_norm(grad);
            const double clip = norm > config.max_grad_norm ? config.max_grad_norm / norm : 1.0;
            auto params = m.parameters();
            const auto grads = grad.parameters();
            for (std::size_t p = 0; p < params.size(); ++p)
                for (std::size_t i = 0; i < params[p].values.size(); ++i)
                    params[p].values[i] -= config.learning_rate * clip * grads[p].values[i];
        }
        result.epoch_losses.push_back(running / static_cast<double>(n));
    }
    result.final_loss = loss(m, sequences, config).total;
    if (!std::isfinite(result.final_loss) || !m.all_finite())
        throw Error(ErrorKind::NonFiniteLoss, "dkt diverged in epoch " + std::to_string(config.epochs));
    return result;
}

std::vector<AttemptPrediction> predict_attempts(const Model& model, const StudentSequence& sequence) {
    std::vector<AttemptPrediction> out;
    out.reserve(sequence.steps.size());
    if (sequence.steps.empty()) return out;
    const ForwardCache c = run_forward(model, sequence);
    for (std::size_t t = 0; t < sequence.steps.size(); ++t) {
        const auto& step = sequence.steps[t];
        const double p = c.probs(static_cast<Eigen::Index>(step.skill), static_cast<Eigen::Index>(t));
        AttemptPrediction pred{sequence.student_id, step.skill_id, step.item_id, std::nullopt};
        if (std::isfinite(p)) pred.probability = p;
        out.push_back(std::move(pred));
    }
    return out;
}

double total_variation(const Model& model, const StudentSequence& sequence) {
    if (sequence.steps.empty()) return 0.0;
    const ForwardCache c = run_forward(model, sequence);
    double tv = 0.0;
    for (Eigen::Index t = 1; t < c.probs.cols(); ++t) tv += (c.probs.col(t) - c.probs.col(t - 1)).cwiseAbs().sum();
    return tv;
}

void save_checkpoint(std::ostream& out, const Model& model, const Config& config) {
    using checkpoint::to_hex;
    nlohmann::json doc = {
        {"format", "ktrace-dkt-checkpoint"},
        {"version", 1},
        {"num_skills", model.num_skills()},
        {"hidden_size", model.hidden_size()},
        {"config",
         {{"hidden_size", config.hidden_size},
          {"learning_rate", to_hex(config.learning_rate)},
          {"epochs", config.epochs},
          {"lambda_r", to_hex(config.lambda_r)},
          {"lambda_w1", to_hex(config.lambda_w1)},
          {"lambda_w2", to_hex(config.lambda_w2)},
          {"seed", config.seed},
          {"max_grad_norm", to_hex(config.max_grad_norm)}}},
        {"parameters", checkpoint::encode(model.parameters())},
    };
    out << doc.dump(1) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "failed writing dkt checkpoint");
}

namespace {

Checkpoint decode_checkpoint(const nlohmann::json& doc) {
    using checkpoint::field;
    using checkpoint::from_hex;
    Checkpoint ck;
    const auto& cfg = doc.at("config");
    ck.config.hidden_size = field<int>(cfg, "hidden_size");
    ck.config.learning_rate = from_hex(field<std::string>(cfg, "learning_rate"));
    ck.config.epochs = field<int>(cfg, "epochs");
    ck.config.lambda_r = from_hex(field<std::string>(cfg, "lambda_r"));
    ck.config.lambda_w1 = from_hex(field<std::string>(cfg, "lambda_w1"));
    ck.config.lambda_w2 = from_hex(field<std::string>(cfg, "lambda_w2"));
    ck.config.seed = field<std::uint64_t>(cfg, "seed");
    ck.config.max_grad_norm = from_hex(field<std::string>(cfg, "max_grad_norm"));

    const auto skills = field<std::uint64_t>(doc, "num_skills");
    const int hidden = field<int>(doc, "hidden_size");
    if (skills == 0 || hidden < 1) throw Error(ErrorKind::BadCheckpoint, "invalid dkt dimensions");
    ck.model = Model(static_cast<std::size_t>(skills), hidden);
    checkpoint::decode(doc.at("parameters"), ck.model.parameters());
    return ck;
}

}  // namespace

Checkpoint load_checkpoint(std::istream& in) {
    using checkpoint::field;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::BadCheckpoint, std::string("dkt checkpoint: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != "ktrace-dkt-checkpoint")
        throw Error(ErrorKind::BadCheckpoint, "not a dkt checkpoint");
    if (field<int>(doc, "version") != 1) throw Error(ErrorKind::BadCheckpoint, "unsupported dkt checkpoint version");

    try {
        return decode_checkpoint(doc);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::BadCheckpoint, std::string("dkt checkpoint: ") + e.what());
    }
}

}  // namespace ktrace::dkt
