#pragma once

#include "ed2/d2p/model.hpp"
#include "ed2/envs/dataset.hpp"
#include "ed2/nn/optim.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ed2::d2p {

struct TrainHyper {
    std::size_t batch = 64;
    std::size_t steps = 1000;
    double lr = 3e-3;
    // Each train() call anneals the step size geometrically from lr to lr * lr_end_fraction.
    double lr_end_fraction = 0.05;
    std::size_t seq_len = 16;  // recurrent kernels only
    std::uint64_t seed = 0;    // drives the "shuffle" stream
    // Fit the model's normalizer on the data of the first train() call, unless already set.
    bool normalize = true;
};

// Aligned steps of a (possibly length-1) sequence batch. target = [s_next - s, r].
struct SequenceBatch {
    std::vector<nn::Matrix> s;
    std::vector<nn::Matrix> a;
    std::vector<nn::Matrix> target;
};

// Teacher-forced loss: mean over steps of the MSE on (delta s, r), standardized by the model's
// normalizer. Recurrent models start
// from h = 0 and carry their averaged latent through the sequence.
nn::Var sequence_loss(const D2PModel& model, nn::Tape& tape, const SequenceBatch& batch);
double batch_loss(const D2PModel& model, const SequenceBatch& batch);
// Reverse-mode gradients of batch_loss for every model tensor.
nn::Gradients batch_gradients(const D2PModel& model, const SequenceBatch& batch);

SequenceBatch make_batch(std::span<const envs::Transition* const> rows);

// Continuous Adam training; keeps optimizer and sampling state across train() calls.
class Trainer {
public:
    Trainer(D2PModel& model, TrainHyper hyper);

    // Runs `steps` updates on batches drawn (with replacement) from `data` and returns the
    // loss of each step. Throws InvalidInput if no batch can be formed and NumericalError on a
    // NaN/Inf loss, carrying the cumulative step index.
    std::vector<double> train(std::span<const envs::Transition> data, std::size_t steps);

    std::size_t steps_done() const { return steps_done_; }
    const nn::AdamState& optimizer() const { return adam_; }

private:
    D2PModel& model_;
    TrainHyper hyper_;
    nn::AdamState adam_;
    Rng rng_;
    std::size_t steps_done_ = 0;
};

struct TrainResult {
    D2PModel model;
    std::vector<double> loss_trace;
};

TrainResult train_model(D2PModel model, const envs::Dataset& dataset, const TrainHyper& hyper);

// Start indices k such that data[k..k+len) is one contiguous stretch of a single episode.
std::vector<std::size_t> sequence_starts(std::span<const envs::Transition> data, std::size_t len);

}  // namespace ed2::d2p
