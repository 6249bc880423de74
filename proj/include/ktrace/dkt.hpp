#pragma once

// Deep Knowledge Tracing: an LSTM over one-hot (skill, correctness) inputs
// with a per-skill logistic output layer, trained on next-step
// cross-entropy plus the reconstruction and waviness regularisers
//
//   L = L_next + lambda_r * L_current + lambda_w1 * w1 + lambda_w2 * w2
//
// where w1 / w2 are the mean absolute / squared change of the per-skill
// prediction vector between consecutive time steps.

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "ktrace/dataset.hpp"
#include "ktrace/param_view.hpp"
#include "ktrace/prediction.hpp"

namespace ktrace::dkt {

struct Config {
    int hidden_size = 64;
    double learning_rate = 0.01;
    int epochs = 50;
    double lambda_r = 0.1;
    double lambda_w1 = 0.03;
    double lambda_w2 = 3.0;
    std::uint64_t seed = 42;
    double max_grad_norm = 5.0;

    // Throws InvalidConfig.
    void validate() const;
};

class Model {
public:
    Model() = default;
    // All-zero parameters.
    Model(std::size_t num_skills, int hidden_size);

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases except
    // the forget gate (1.0).
    static Model initialize(std::size_t num_skills, int hidden_size, std::uint64_t seed);

    std::size_t num_skills() const noexcept { return num_skills_; }
    int hidden_size() const noexcept { return hidden_size_; }

    std::vector<ParamView> parameters();
    std::vector<ConstParamView> parameters() const;

    void set_zero();
    bool all_finite() const;

    friend bool operator==(const Model& a, const Model& b);

    // Gate blocks are stacked as [input; forget; output; candidate].
    Eigen::MatrixXd input_weights;      // 4H x 2S
    Eigen::MatrixXd recurrent_weights;  // 4H x H
    Eigen::VectorXd gate_bias;          // 4H
    Eigen::MatrixXd output_weights;     // S x H
    Eigen::VectorXd output_bias;        // S

private:
    std::size_t num_skills_ = 0;
    int hidden_size_ = 0;
};

// Unit vector at skill + S * correct. Throws IndexOutOfRange.
Eigen::VectorXd encode_input(std::size_t skill, bool correct, std::size_t num_skills);

// Prediction vector from the initial (zero) state, used for step 1.
Eigen::VectorXd initial_prediction(const Model& model);

// T x S; row t holds the per-skill predictions after consuming steps 1..t.
Eigen::MatrixXd forward(const Model& model, const StudentSequence& sequence);

struct LossTerms {
    double next = 0.0;
    double current = 0.0;
    double w1 = 0.0;
    double w2 = 0.0;
    double total = 0.0;
};

// Corpus-level loss; every term is a mean over all predicted steps.
LossTerms loss(const Model& model, std::span<const StudentSequence> sequences, const Config& config);

// Total loss and its gradient (same shape as the model).
double loss_gradient(const Model& model, std::span<const StudentSequence> sequences,
                     const Config& config, Model& gradient);

struct TrainResult {
    Model model;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> epoch_losses;  // running loss seen during each epoch
};

// Per-sequence SGD with backpropagation through time and global-norm
// clipping, in one fixed order shuffled from the seed.
// Throws NonFiniteLoss naming the epoch.
TrainResult train(std::span<const StudentSequence> sequences, std::size_t num_skills,
                  const Config& config);

// One pre-observation probability per step; non-finite values become Invalid.
std::vector<AttemptPrediction> predict_attempts(const Model& model, const StudentSequence& sequence);

// Sum over consecutive steps of the L1 change in the prediction vector,
// starting from the initial prediction.
double total_variation(const Model& model, const StudentSequence& sequence);

void save_checkpoint(std::ostream& out, const Model& model, const Config& config);

struct Checkpoint {
    Model model;
    Config config;
};

// Throws BadCheckpoint.
Checkpoint load_checkpoint(std::istream& in);

}  // namespace ktrace::dkt
