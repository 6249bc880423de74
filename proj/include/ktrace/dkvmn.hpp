#pragma once

// Dynamic Key-Value Memory Network for knowledge tracing.
//
// A static key memory (N x d_k) addresses a per-student value memory
// (N x d_v). Each attempt attends with its skill's query embedding, reads a
// weighted summary of the value memory to predict correctness, and then
// writes the (skill, answer) embedding back through erase/add gates.

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "ktrace/dataset.hpp"
#include "ktrace/param_view.hpp"
#include "ktrace/prediction.hpp"

namespace ktrace::dkvmn {

struct Config {
    int memory_slots = 8;
    int key_dim = 16;
    int value_dim = 16;
    int summary_dim = 16;
    double learning_rate = 0.01;
    int epochs = 50;
    std::uint64_t seed = 42;
    double max_grad_norm = 5.0;

    // Throws InvalidConfig.
    void validate() const;
};

class Model {
public:
    Model() = default;
    // All-zero parameters.
    Model(std::size_t num_skills, const Config& dims);

    static Model initialize(std::size_t num_skills, const Config& config);

    std::size_t num_skills() const noexcept { return num_skills_; }
    Eigen::Index memory_slots() const noexcept { return key_memory.rows(); }
    Eigen::Index key_dim() const noexcept { return key_memory.cols(); }
    Eigen::Index value_dim() const noexcept { return value_memory_init.cols(); }
    Eigen::Index summary_dim() const noexcept { return summary_bias.size(); }

    std::vector<ParamView> parameters();
    std::vector<ConstParamView> parameters() const;

    void set_zero();
    bool all_finite() const;

    friend bool operator==(const Model& a, const Model& b);

    Eigen::MatrixXd key_memory;         // N x d_k
    Eigen::MatrixXd value_memory_init;  // N x d_v, copied per student
    Eigen::MatrixXd query_embedding;    // S x d_k
    Eigen::MatrixXd answer_embedding;   // 2S x d_v, row skill + S * correct
    Eigen::MatrixXd summary_weights;    // F x (d_v + d_k), applied to [read; query]
    Eigen::VectorXd summary_bias;       // F
    Eigen::VectorXd output_weights;     // F
    Eigen::VectorXd output_bias;        // 1
    Eigen::MatrixXd erase_weights;      // d_v x d_v
    Eigen::VectorXd erase_bias;         // d_v
    Eigen::MatrixXd add_weights;        // d_v x d_v
    Eigen::VectorXd add_bias;           // d_v

private:
    std::size_t num_skills_ = 0;
};

// Per-student value memory, N x d_v.
using ValueMemory = Eigen::MatrixXd;

// softmax(key_memory * query).
Eigen::VectorXd attention(const Eigen::VectorXd& query, const Eigen::MatrixXd& key_memory);

// Correctness probability read from the memory under attention `weights`.
double read_predict(const ValueMemory& state, const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& query, const Model& model);

// Row i becomes state(i) * (1 - w(i) * erase) + w(i) * add.
ValueMemory apply_write(const ValueMemory& state, const Eigen::VectorXd& weights,
                        const Eigen::VectorXd& erase, const Eigen::VectorXd& add);

// Erase/add vectors derived from the answer embedding, then apply_write.
ValueMemory write(const ValueMemory& state, const Eigen::VectorXd& weights,
                  const Eigen::VectorXd& answer, const Model& model);

// Mean next-attempt cross-entropy over every step of the corpus.
double loss(const Model& model, std::span<const StudentSequence> sequences);
double loss_gradient(const Model& model, std::span<const StudentSequence> sequences, Model& gradient);

struct TrainResult {
    Model model;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> epoch_losses;
};

// Per-sequence Adam with global-norm clipping, in one fixed shuffled order.
// Throws NonFiniteLoss.
TrainResult train(std::span<const StudentSequence> sequences, std::size_t num_skills,
                  const Config& config);

std::vector<AttemptPrediction> predict_attempts(const Model& model, const StudentSequence& sequence);

void save_checkpoint(std::ostream& out, const Model& model, const Config& config);

struct Checkpoint {
    Model model;
    Config config;
};

// Throws BadCheckpoint.
Checkpoint load_checkpoint(std::istream& in);

}  // namespace ktrace::dkvmn
