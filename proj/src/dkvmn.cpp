#include "ktrace/dkvmn.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "checkpoint.hpp"
#include "ktrace/error.hpp"
#include "ktrace/rng.hpp"

namespace ktrace::dkvmn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd sigmoid(const VectorXd& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double softplus(double m) { return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }

struct StepCache {
    Index skill;
    Index answer_row;
    VectorXd weights, query, read, summary, erase, add;
    double logit;
    double prob;
};

struct ForwardCache {
    std::vector<MatrixXd> states;  // T+1 value memories; states[t] is read at step t
    std::vector<StepCache> steps;
};

VectorXd summary_input(const VectorXd& read, const VectorXd& query) {
    VectorXd x(read.size() + query.size());
    x << read, query;
    return x;
}

ForwardCache run_forward(const Model& m, const StudentSequence& seq) {
    const auto S = static_cast<Index>(m.num_skills());
    ForwardCache c;
    c.states.reserve(seq.steps.size() + 1);
    c.steps.reserve(seq.steps.size());
    c.states.push_back(m.value_memory_init);
    for (const auto& step : seq.steps) {
        if (static_cast<Index>(step.skill) >= S)
            throw Error(ErrorKind::IndexOutOfRange, "skill index " + std::to_string(step.skill));
        StepCache sc;
        sc.skill = static_cast<Index>(step.skill);
        sc.answer_row = sc.skill + (step.correct ? S : 0);
        const MatrixXd& state = c.states.back();
        sc.query = m.query_embedding.row(sc.skill).transpose();
        sc.weights = attention(sc.query, m.key_memory);
        sc.read = state.transpose() * sc.weights;
        sc.summary = (m.summary_weights * summary_input(sc.read, sc.query) + m.summary_bias).array().tanh().matrix();
        sc.logit = m.output_weights.dot(sc.summary) + m.output_bias(0);
        sc.prob = sigmoid(sc.logit);
        const VectorXd answer = m.answer_embedding.row(sc.answer_row).transpose();
        sc.erase = sigmoid(m.erase_weights * answer + m.erase_bias);
        sc.add = (m.add_weights * answer + m.add_bias).array().tanh().matrix();
        c.states.push_back(apply_write(state, sc.weights, sc.erase, sc.add));
        c.steps.push_back(std::move(sc));
    }
    return c;
}

double accumulate(const Model& m, const StudentSequence& seq, double scale, Model* grad) {
    if (seq.steps.empty()) return 0.0;
    const ForwardCache c = run_forward(m, seq);
    double total = 0.0;
    for (std::size_t t = 0; t < seq.steps.size(); ++t)
        total += softplus(c.steps[t].logit) - (seq.steps[t].correct ? c.steps[t].logit : 0.0);
    if (!grad) return scale * total;

    const Index dv = m.value_dim();
    MatrixXd d_state = MatrixXd::Zero(m.memory_slots(), dv);  // w.r.t. memory after step t's write
    for (std::size_t tt = seq.steps.size(); tt-- > 0;) {
        const StepCache& sc = c.steps[tt];
        const MatrixXd& state = c.states[tt];
        const double y = seq.steps[tt].correct ? 1.0 : 0.0;

        // write
        VectorXd d_weights = (d_state.array() * (sc.add.transpose().replicate(state.rows(), 1).array() -
                                                 state.array().rowwise() * sc.erase.transpose().array()))
                                 .rowwise()
                                 .sum()
                                 .matrix();
        const VectorXd d_erase = -((d_state.array() * state.array()).matrix().transpose() * sc.weights);
        const VectorXd d_add = d_state.transpose() * sc.weights;
        MatrixXd d_prev = d_state.array() * (1.0 - (sc.weights * sc.erase.transpose()).array());

        // read and predict
        const double du = scale * (sc.prob - y);
        grad->output_weights += du * sc.summary;
        grad->output_bias(0) += du;
        const VectorXd dz_summary = (du * m.output_weights).array() * (1.0 - sc.summary.array().square());
        grad->summary_weights.noalias() += dz_summary * summary_input(sc.read, sc.query).transpose();
        grad->summary_bias += dz_summary;
        const VectorXd d_input = m.summary_weights.transpose() * dz_summary;
        const VectorXd d_read = d_input.head(dv);
        VectorXd d_query = d_input.tail(m.key_dim());
        d_prev.noalias() += sc.weights * d_read.transpose();
        d_weights.noalias() += state * d_read;

        // erase / add transforms
        const VectorXd answer = m.answer_embedding.row(sc.answer_row).transpose();
        const VectorXd dz_erase = d_erase.array() * sc.erase.array() * (1.0 - sc.erase.array());
        const VectorXd dz_add = d_add.array() * (1.0 - sc.add.array().square());
        grad->erase_weights.noalias() += dz_erase * answer.transpose();
        grad->erase_bias += dz_erase;
        grad->add_weights.noalias() += dz_add * answer.transpose();
        grad->add_bias += dz_add;
        grad->answer_embedding.row(sc.answer_row) +=
            (m.erase_weights.transpose() * dz_erase + m.add_weights.transpose() * dz_add).transpose();

        // attention softmax
        const VectorXd d_logits = sc.weights.array() * (d_weights.array() - sc.weights.dot(d_weights));
        grad->key_memory.noalias() += d_logits * sc.query.transpose();
        d_query.noalias() += m.key_memory.transpose() * d_logits;
        grad->query_embedding.row(sc.skill) += d_query.transpose();

        d_state = std::move(d_prev);
    }
    grad->value_memory_init += d_state;
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

template <typename Self>
auto collect(Self& m) {
    using View = std::conditional_t<std::is_const_v<Self>, ConstParamView, ParamView>;
    using Value = std::conditional_t<std::is_const_v<Self>, const double, double>;
    auto view = [](std::string_view name, auto& x) {
        return View{name, x.rows(), x.cols(), std::span<Value>(x.data(), static_cast<std::size_t>(x.size()))};
    };
    return std::vector<View>{
        view("key_memory", m.key_memory),           view("value_memory_init", m.value_memory_init),
        view("query_embedding", m.query_embedding), view("answer_embedding", m.answer_embedding),
        view("summary_weights", m.summary_weights), view("summary_bias", m.summary_bias),
        view("output_weights", m.output_weights),   view("output_bias", m.output_bias),
        view("erase_weights", m.erase_weights),     view("erase_bias", m.erase_bias),
        view("add_weights", m.add_weights),         view("add_bias", m.add_bias),
    };
}

}  // namespace

void Config::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, "dkvmn: " + what); };
    if (memory_slots < 1 || key_dim < 1 || value_dim < 1 || summary_dim < 1)
        fail("memory_slots, key_dim, value_dim and summary_dim must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (epochs < 1) fail("epochs must be >= 1");
    if (!(max_grad_norm > 0.0)) fail("max_grad_norm must be positive");
}

Model::Model(std::size_t num_skills, const Config& dims)
    : key_memory(MatrixXd::Zero(dims.memory_slots, dims.key_dim)),
      value_memory_init(MatrixXd::Zero(dims.memory_slots, dims.value_dim)),
      query_embedding(MatrixXd::Zero(static_cast<Index>(num_skills), dims.key_dim)),
      answer_embedding(MatrixXd::Zero(2 * static_cast<Index>(num_skills), dims.value_dim)),
      summary_weights(MatrixXd::Zero(dims.summary_dim, dims.value_dim + dims.key_dim)),
      summary_bias(VectorXd::Zero(dims.summary_dim)),
      output_weights(VectorXd::Zero(dims.summary_dim)),
      output_bias(VectorXd::Zero(1)),
      erase_weights(MatrixXd::Zero(dims.value_dim, dims.value_dim)),
      erase_bias(VectorXd::Zero(dims.value_dim)),
      add_weights(MatrixXd::Zero(dims.value_dim, dims.value_dim)),
      add_bias(VectorXd::Zero(dims.value_dim)),
      num_skills_(num_skills) {}

Model Model::initialize(std::size_t num_skills, const Config& config) {
    config.validate();
    if (num_skills == 0) throw Error(ErrorKind::InvalidArgument, "dkvmn model needs at least one skill");
    Model m(num_skills, config);
    Rng rng(config.seed);
    // fan_in is the column count of each block; the output layer is a row vector.
    auto fill = [&rng](auto& w, double fan_in) {
        const double bound = 1.0 / std::sqrt(fan_in);
        for (Index j = 0; j < w.cols(); ++j)
            for (Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    };
    fill(m.key_memory, config.key_dim);
    fill(m.value_memory_init, config.value_dim);
    fill(m.query_embedding, config.key_dim);
    fill(m.answer_embedding, config.value_dim);
    fill(m.summary_weights, config.value_dim + config.key_dim);
    fill(m.output_weights, config.summary_dim);
    fill(m.erase_weights, config.value_dim);
    fill(m.add_weights, config.value_dim);
    return m;
}

std::vector<ParamView> Model::parameters() { return collect(*this); }
std::vector<ConstParamView> Model::parameters() const { return collect(*this); }

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
    if (a.num_skills_ != b.num_skills_) return false;
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i].rows != pb[i].rows || pa[i].cols != pb[i].cols) return false;
        if (!std::equal(pa[i].values.begin(), pa[i].values.end(), pb[i].values.begin())) return false;
    }
    return true;
}

Eigen::VectorXd attention(const Eigen::VectorXd& query, const Eigen::MatrixXd& key_memory) {
    VectorXd logits = key_memory * query;
    const double top = logits.maxCoeff();
    VectorXd w = (logits.array() - top).exp().matrix();
    return w / w.sum();
}

double read_predict(const ValueMemory& state, const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& query, const Model& model) {
    const VectorXd read = state.transpose() * weights;
    const VectorXd summary =
        (model.summary_weights * summary_input(read, query) + model.summary_bias).array().tanh().matrix();
    return sigmoid(model.output_weights.dot(summary) + model.output_bias(0));
}

ValueMemory apply_write(const ValueMemory& state, const Eigen::VectorXd& weights,
                        const Eigen::VectorXd& erase, const Eigen::VectorXd& add) {
    ValueMemory next = state;
    for (Index i = 0; i < state.rows(); ++i) {
        const double w = weights(i);
        if (w == 0.0) continue;
        next.row(i) = (state.row(i).array() * (1.0 - w * erase.transpose().array()) + w * add.transpose().array()).matrix();
    }
    return next;
}

ValueMemory write(const ValueMemory& state, const Eigen::VectorXd& weights,
                  const Eigen::VectorXd& answer, const Model& model) {
    const VectorXd erase = sigmoid(model.erase_weights * answer + model.erase_bias);
    const VectorXd add = (model.add_weights * answer + model.add_bias).array().tanh().matrix();
    return apply_write(state, weights, erase, add);
}

double loss(const Model& model, std::span<const StudentSequence> sequences) {
    const std::size_t n = total_steps(sequences);
    if (n == 0) return 0.0;
    double total = 0.0;
    for (const auto& seq : sequences) total += accumulate(model, seq, 1.0 / static_cast<double>(n), nullptr);
    return total;
}

double loss_gradient(const Model& model, std::span<const StudentSequence> sequences, Model& gradient) {
    gradient = model;
    gradient.set_zero();
    const std::size_t n = total_steps(sequences);
    if (n == 0) return 0.0;
    double total = 0.0;
    for (const auto& seq : sequences) total += accumulate(model, seq, 1.0 / static_cast<double>(n), &gradient);
    return total;
}

TrainResult train(std::span<const StudentSequence> sequences, std::size_t num_skills,
                  const Config& config) {
    config.validate();
    const std::size_t n = total_steps(sequences);
    if (n == 0) throw Error(ErrorKind::EmptyData, "dkvmn training corpus has no steps");

    TrainResult result;
    result.model = Model::initialize(num_skills, config);
    Model& m = result.model;
    result.initial_loss = loss(m, sequences);

    std::vector<std::size_t> order(sequences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(config.seed, 1));
    rng.shuffle(std::span<std::size_t>(order));

    Model grad = m;
    // Adam moment estimates, one per parameter.
    Model first = m, second = m;
    first.set_zero();
    second.set_zero();
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double decay1 = 1.0, decay2 = 1.0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double running = 0.0;
        for (std::size_t idx : order) {
            const auto& seq = sequences[idx];
            if (seq.steps.empty()) continue;
            grad.set_zero();
            const double steps = static_cast<double>(seq.steps.size());
            const double l = accumulate(m, seq, 1.0 / steps, &grad);
            if (!std::isfinite(l))
                throw Error(ErrorKind::NonFiniteLoss, "dkvmn diverged in epoch " + std::to_string(epoch) +
                                                          " on student '" + seq.student_id + "'");
            running += l * steps;
            const double norm = global_norm(grad);
            const double clip = norm > config.max_grad_norm ? config.max_grad_norm / norm : 1.0;
            decay1 *= beta1;
            decay2 *= beta2;
            const double step = config.learning_rate * std::sqrt(1.0 - decay2) / (1.0 - decay1);
            auto params = m.parameters();
            auto m1 = first.parameters();
            auto m2 = second.parameters();
            const auto grads = std::as_const(grad).parameters();
            for (std::size_t p = 0; p < params.size(); ++p) {
                for (std::size_t i = 0; i < params[p].values.size(); ++i) {
                    const double g = clip * grads[p].values[i];
                    m1[p].values[i] = beta1 * m1[p].values[i] + (1.0 - beta1) * g;
                    m2[p].values[i] = beta2 * m2[p].values[i] + (1.0 - beta2) * g * g;
                    params[p].values[i] -= step * m1[p].values[i] / (std::sqrt(m2[p].values[i]) + eps);
                }
            }
        }
        result.epoch_losses.push_back(running / static_cast<double>(n));
    }
    result.final_loss = loss(m, sequences);
    if (!std::isfinite(result.final_loss) || !m.all_finite())
        throw Error(ErrorKind::NonFiniteLoss, "dkvmn diverged in epoch " + std::to_string(config.epochs));
    return result;
}

std::vector<AttemptPrediction> predict_attempts(const Model& model, const StudentSequence& sequence) {
    std::vector<AttemptPrediction> out;
    out.reserve(sequence.steps.size());
    if (sequence.steps.empty()) return out;
    const ForwardCache c = run_forward(model, sequence);
    for (std::size_t t = 0; t < sequence.steps.size(); ++t) {
        const auto& step = sequence.steps[t];
        AttemptPrediction pred{sequence.student_id, step.skill_id, step.item_id, std::nullopt};
        if (std::isfinite(c.steps[t].prob)) pred.probability = c.steps[t].prob;
        out.push_back(std::move(pred));
    }
    return out;
}

void save_checkpoint(std::ostream& out, const Model& model, const Config& config) {
    using checkpoint::to_hex;
    nlohmann::json doc = {
        {"format", "ktrace-dkvmn-checkpoint"},
        {"version", 1},
        {"num_skills", model.num_skills()},
        {"memory_slots", model.memory_slots()},
        {"key_dim", model.key_dim()},
        {"value_dim", model.value_dim()},
        {"summary_dim", model.summary_dim()},
        {"config",
         {{"memory_slots", config.memory_slots},
          {"key_dim", config.key_dim},
          {"value_dim", config.value_dim},
          {"summary_dim", config.summary_dim},
          {"learning_rate", to_hex(config.learning_rate)},
          {"epochs", config.epochs},
          {"seed", config.seed},
          {"max_grad_norm", to_hex(config.max_grad_norm)}}},
        {"parameters", checkpoint::encode(model.parameters())},
    };
    out << doc.dump(1) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "failed writing dkvmn checkpoint");
}

namespace {

Checkpoint decode_checkpoint(const nlohmann::json& doc) {
    using checkpoint::field;
    using checkpoint::from_hex;
    Checkpoint ck;
    const auto& cfg = doc.at("config");
    ck.config.memory_slots = field<int>(cfg, "memory_slots");
    ck.config.key_dim = field<int>(cfg, "key_dim");
    ck.config.value_dim = field<int>(cfg, "value_dim");
    ck.config.summary_dim = field<int>(cfg, "summary_dim");
    ck.config.learning_rate = from_hex(field<std::string>(cfg, "learning_rate"));
    ck.config.epochs = field<int>(cfg, "epochs");
    ck.config.seed = field<std::uint64_t>(cfg, "seed");
    ck.config.max_grad_norm = from_hex(field<std::string>(cfg, "max_grad_norm"));

    Config dims;
    dims.memory_slots = field<int>(doc, "memory_slots");
    dims.key_dim = field<int>(doc, "key_dim");
    dims.value_dim = field<int>(doc, "value_dim");
    dims.summary_dim = field<int>(doc, "summary_dim");
    const auto skills = field<std::uint64_t>(doc, "num_skills");
    if (skills == 0 || dims.memory_slots < 1 || dims.key_dim < 1 || dims.value_dim < 1 || dims.summary_dim < 1)
        throw Error(ErrorKind::BadCheckpoint, "invalid dkvmn dimensions");
    ck.model = Model(static_cast<std::size_t>(skills), dims);
    checkpoint::decode(doc.at("parameters"), ck.model.parameters());
    return ck;
}

}  // namespace

Checkpoint load_checkpoint(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::BadCheckpoint, std::string("dkvmn checkpoint: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != "ktrace-dkvmn-checkpoint")
        throw Error(ErrorKind::BadCheckpoint, "not a dkvmn checkpoint");
    try {
        if (doc.at("version").get<int>() != 1)
            throw Error(ErrorKind::BadCheckpoint, "unsupported dkvmn checkpoint version");
        return decode_checkpoint(doc);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::BadCheckpoint, std::string("dkvmn checkpoint: ") + e.what());
    }
}

}  // namespace ktrace::dkvmn
