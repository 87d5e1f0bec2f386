#pragma once

#include "ed2/d2p/model.hpp"
#include "ed2/d2p/train.hpp"
#include "ed2/envs/block_env.hpp"
#include "ed2/envs/dataset.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ed2::d2p {

// Anything that predicts (s', r) from (s, a) for a batch, optionally carrying a latent state.
class WorldModel {
public:
    virtual ~WorldModel() = default;

    virtual std::size_t state_width() const = 0;
    virtual std::size_t action_width() const = 0;
    // Width of the carried latent; 0 for stateless models.
    virtual std::size_t latent_width() const { return 0; }

    // Rows are samples. When latent_width() > 0, *h (batch x latent) is read and replaced.
    virtual void predict(const nn::Matrix& s, const nn::Matrix& a, nn::Matrix* h, nn::Matrix& s_next,
                         nn::Matrix& r) const = 0;

    // Further training on `data`; returns the per-step loss (empty if nothing is learned).
    virtual std::vector<double> fit(std::span<const envs::Transition> data, std::size_t steps) = 0;

    virtual std::size_t parameter_count() const { return 0; }
};

// A D2PModel with its own persistent trainer.
class LearnedModel : public WorldModel {
public:
    LearnedModel(D2PModel model, TrainHyper hyper);

    std::size_t state_width() const override { return model_.config().state_width; }
    std::size_t action_width() const override { return model_.config().action_width; }
    std::size_t latent_width() const override;
    void predict(const nn::Matrix& s, const nn::Matrix& a, nn::Matrix* h, nn::Matrix& s_next,
                 nn::Matrix& r) const override;
    std::vector<double> fit(std::span<const envs::Transition> data, std::size_t steps) override;
    std::size_t parameter_count() const override { return model_.parameter_count(); }

    const D2PModel& model() const { return *holder_; }
    Trainer& trainer() { return trainer_; }

private:
    // Trainer keeps a reference to the model, so it lives at a stable address.
    std::unique_ptr<D2PModel> holder_;
    D2PModel& model_;
    Trainer trainer_;
};

// The true environment step wrapped as a model.
class OracleModel : public WorldModel {
public:
    explicit OracleModel(envs::BlockEnvSpec spec);

    std::size_t state_width() const override { return spec_.state_width(); }
    std::size_t action_width() const override { return spec_.action_width(); }
    void predict(const nn::Matrix& s, const nn::Matrix& a, nn::Matrix* h, nn::Matrix& s_next,
                 nn::Matrix& r) const override;
    std::vector<double> fit(std::span<const envs::Transition>, std::size_t) override { return {}; }

private:
    envs::BlockEnvSpec spec_;
};

// Mean over transitions and the n+1 outputs of squared error on (s_next - s, r). Latent
// models are run teacher-forced over each contiguous episode stretch starting from h = 0.
double one_step_mse(const WorldModel& model, std::span<const envs::Transition> data);

struct RolloutResult {
    std::vector<std::vector<double>> states;  // predicted s_1..s_T
    std::vector<double> rewards;
};

// Closed loop: each step consumes the model's previous prediction. Throws NumericalError
// with the step index on a non-finite prediction.
RolloutResult rollout(const WorldModel& model, std::span<const double> s0,
                      const std::vector<std::vector<double>>& actions, std::span<const double> h0 = {});

}  // namespace ed2::d2p
