#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ktrace/dkvmn.hpp"
#include "ktrace/error.hpp"
#include "support.hpp"

using namespace ktrace;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

dkvmn::Config small_config() {
    dkvmn::Config c;
    c.memory_slots = 3;
    c.key_dim = 4;
    c.value_dim = 5;
    c.summary_dim = 4;
    c.epochs = 3;
    c.seed = 9;
    return c;
}

VectorXd random_vector(Rng& rng, Eigen::Index n, double scale = 1.0) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-scale, scale);
    return v;
}

MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
    return m;
}

}  // namespace

TEST_SUITE("dkvmn") {

TEST_CASE("attention") {
    Rng rng(1);
    const VectorXd q = random_vector(rng, 4);
    CHECK(dkvmn::attention(q, random_matrix(rng, 1, 4))(0) == 1.0);

    const MatrixXd same = MatrixXd::Constant(5, 4, 0.3);
    const VectorXd w = dkvmn::attention(q, same);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(w(i) == doctest::Approx(0.2).epsilon(1e-15));

    // An extra key column of ones and query entry c adds c to every logit.
    const MatrixXd keys = random_matrix(rng, 6, 4);
    MatrixXd shifted_keys(6, 5);
    shifted_keys << keys, VectorXd::Ones(6);
    VectorXd shifted_q(5);
    shifted_q << q, 37.5;
    const VectorXd a = dkvmn::attention(q, keys);
    const VectorXd b = dkvmn::attention(shifted_q, shifted_keys);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("read_predict") {
    const auto cfg = small_config();
    auto model = dkvmn::Model::initialize(3, cfg);
    Rng rng(4);
    const VectorXd q = random_vector(rng, cfg.key_dim);

    dkvmn::Model zero = model;
    zero.summary_weights.setZero();
    zero.summary_bias.setZero();
    zero.output_weights.setZero();
    zero.output_bias.setZero();
    const MatrixXd empty = MatrixXd::Zero(cfg.memory_slots, cfg.value_dim);
    CHECK(dkvmn::read_predict(empty, dkvmn::attention(q, model.key_memory), q, zero) == 0.5);

    // A one-hot read sees exactly that row: moving the row elsewhere and
    // attending there gives a bitwise-identical prediction.
    const MatrixXd state = random_matrix(rng, cfg.memory_slots, cfg.value_dim);
    MatrixXd moved = random_matrix(rng, cfg.memory_slots, cfg.value_dim);
    moved.row(0) = state.row(2);
    VectorXd at2 = VectorXd::Zero(cfg.memory_slots), at0 = VectorXd::Zero(cfg.memory_slots);
    at2(2) = 1.0;
    at0(0) = 1.0;
    CHECK(dkvmn::read_predict(state, at2, q, model) == dkvmn::read_predict(moved, at0, q, model));

    for (int trial = 0; trial < 1000; ++trial) {
        auto m = dkvmn::Model::initialize(3, cfg);
        m.summary_weights = random_matrix(rng, m.summary_weights.rows(), m.summary_weights.cols(), 3.0);
        m.output_weights = random_vector(rng, m.output_weights.size(), 3.0);
        const VectorXd query = random_vector(rng, cfg.key_dim, 2.0);
        const double p = dkvmn::read_predict(random_matrix(rng, cfg.memory_slots, cfg.value_dim, 2.0),
                                             dkvmn::attention(query, m.key_memory), query, m);
        CHECK((p > 0.0 && p < 1.0));
    }
}

TEST_CASE("apply_write") {
    Rng rng(5);
    const MatrixXd state = random_matrix(rng, 4, 3);
    const VectorXd erase = random_vector(rng, 3).cwiseAbs();
    const VectorXd add = random_vector(rng, 3);
    VectorXd w(4);
    w << 0.0, 0.7, 0.3, 0.0;
    const MatrixXd next = dkvmn::apply_write(state, w, erase, add);
    CHECK((next.row(0).array() == state.row(0).array()).all());
    CHECK((next.row(3).array() == state.row(3).array()).all());
    CHECK((next.row(1) - state.row(1)).norm() > 0.0);

    VectorXd one = VectorXd::Zero(4);
    one(2) = 1.0;
    const MatrixXd replaced = dkvmn::apply_write(state, one, VectorXd::Ones(3), add);
    CHECK((replaced.row(2).transpose().array() == add.array()).all());

    const MatrixXd same = dkvmn::apply_write(state, w, VectorXd::Zero(3), VectorXd::Zero(3));
    CHECK((same.array() == state.array()).all());
}

TEST_CASE("per-student predictions") {
    const auto cfg = small_config();
    const auto model = dkvmn::Model::initialize(3, cfg);
    StudentSequence one{"s1", {{1, "k1", "i1", false}}};
    const auto p = dkvmn::predict_attempts(model, one);
    REQUIRE(p.size() == 1);
    const VectorXd q = model.query_embedding.row(1).transpose();
    CHECK(*p[0].probability ==
          dkvmn::read_predict(model.value_memory_init, dkvmn::attention(q, model.key_memory), q, model));

    const auto seqs = fixture::random_sequences(4, 3, 2, 8, 6);
    for (const auto& s : seqs) CHECK(dkvmn::predict_attempts(model, s).size() == s.steps.size());

    // A student's predictions depend only on that student's history: the
    // shared prefix of two histories yields identical predictions.
    auto other = seqs[0];
    other.student_id = "other";
    for (std::size_t t = 3; t < other.steps.size(); ++t) other.steps[t].correct = !other.steps[t].correct;
    const auto pa = dkvmn::predict_attempts(model, seqs[0]);
    const auto pb = dkvmn::predict_attempts(model, other);
    for (std::size_t t = 0; t < std::min<std::size_t>(4, pa.size()); ++t) CHECK(*pa[t].probability == *pb[t].probability);
}

TEST_CASE("corpus order does not leak between students") {
    const auto cfg = small_config();
    const auto model = dkvmn::Model::initialize(3, cfg);
    const auto seqs = fixture::random_sequences(2, 3, 3, 6, 12);
    const auto before0 = dkvmn::predict_attempts(model, seqs[0]);
    const auto before1 = dkvmn::predict_attempts(model, seqs[1]);
    const std::vector<StudentSequence> swapped = {seqs[1], seqs[0]};
    CHECK(dkvmn::loss(model, seqs) == doctest::Approx(dkvmn::loss(model, swapped)).epsilon(1e-14));
    const auto after0 = dkvmn::predict_attempts(model, swapped[1]);
    const auto after1 = dkvmn::predict_attempts(model, swapped[0]);
    for (std::size_t t = 0; t < before0.size(); ++t) CHECK(*before0[t].probability == *after0[t].probability);
    for (std::size_t t = 0; t < before1.size(); ++t) CHECK(*before1[t].probability == *after1[t].probability);
}

TEST_CASE("analytic gradient matches central differences") {
    dkvmn::Config cfg;
    cfg.memory_slots = 3;
    cfg.key_dim = 4;
    cfg.value_dim = 5;
    cfg.summary_dim = 4;
    cfg.seed = 31;
    const auto seqs = fixture::random_sequences(3, 3, 2, 5, 22);
    auto model = dkvmn::Model::initialize(3, cfg);
    Rng rng(8);
    // Non-zero biases so every block carries gradient.
    for (auto& p : model.parameters())
        for (double& v : p.values) v += rng.uniform(-0.3, 0.3);
    dkvmn::Model grad = model;
    dkvmn::loss_gradient(model, seqs, grad);
    const auto worst = oracle::gradient_check(model, grad, [&](const dkvmn::Model& m) { return dkvmn::loss(m, seqs); });
    for (const auto& [name, err] : worst) {
        INFO(name);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("training is deterministic and lowers the loss") {
    const auto seqs = fixture::random_sequences(20, 3, 3, 10, 13);
    const auto a = dkvmn::train(seqs, 3, small_config());
    const auto b = dkvmn::train(seqs, 3, small_config());
    CHECK(a.model == b.model);
    CHECK(a.final_loss < a.initial_loss);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    const auto model = dkvmn::Model::initialize(3, small_config());
    std::stringstream buf;
    dkvmn::save_checkpoint(buf, model, small_config());
    const auto back = dkvmn::load_checkpoint(buf);
    CHECK(back.model == model);
    CHECK(back.config.memory_slots == small_config().memory_slots);

    std::stringstream truncated(buf.str().substr(0, buf.str().size() / 2));
    CHECK_THROWS_AS(dkvmn::load_checkpoint(truncated), Error);
}

}  // TEST_SUITE
