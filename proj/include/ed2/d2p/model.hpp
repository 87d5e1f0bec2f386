#pragma once

#include "ed2/envs/dataset.hpp"
#include "ed2/nn/layers.hpp"
#include "ed2/nn/tape.hpp"
#include "ed2/sd2/partition.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ed2::d2p {

enum class KernelKind { nonrecurrent, recurrent };

// decomposed: one kernel per group, fed its sub-action.
// kernel_ensemble: ensemble_size kernels, all fed the full action.
// monolithic: a single kernel fed the full action.
enum class ModelVariant { decomposed, kernel_ensemble, monolithic };

std::string to_string(KernelKind k);
std::string to_string(ModelVariant v);
KernelKind kernel_kind_from_string(const std::string& s);
ModelVariant variant_from_string(const std::string& s);

struct D2PModelConfig {
    ModelVariant variant = ModelVariant::decomposed;
    KernelKind kernel_kind = KernelKind::nonrecurrent;
    // Kernel order for the decomposed variant. Normally a canonical Partition's groups, but any
    // order is accepted; outputs are reduced in canonical order regardless.
    std::vector<sd2::Group> groups;
    std::size_t state_width = 0;
    std::size_t action_width = 0;
    std::size_t ensemble_size = 1;
    std::size_t latent_width = 32;
    std::size_t kernel_hidden = 32;
    std::size_t decoder_hidden = 32;
    nn::Activation activation = nn::Activation::tanh;
    bool predict_delta = true;

    static D2PModelConfig decomposed(const sd2::Partition& partition, std::size_t state_width);
    static D2PModelConfig monolithic(std::size_t state_width, std::size_t action_width);
    static D2PModelConfig ensemble(std::size_t state_width, std::size_t action_width, std::size_t kernels);

    void validate() const;
    std::size_t kernel_count() const;
    // Action indices consumed by kernel k, ascending.
    std::vector<std::size_t> kernel_inputs(std::size_t k) const;
    std::size_t parameter_count() const;
    std::string label() const;
};

nlohmann::json config_to_json(const D2PModelConfig& c);
D2PModelConfig config_from_json(const nlohmann::json& j);

// Returns `base` with kernel_hidden chosen so the parameter count is as close as possible to
// `target`. Throws InvalidInput when the best count is off by more than `tolerance` (relative).
D2PModelConfig match_parameter_count(D2PModelConfig base, std::size_t target, double tolerance = 0.05);

// Fixed affine scaling around the network. Inputs: s -> (s - state_mean) / state_scale.
// Outputs: the decoder and reward head produce standardized [delta s, r], mapped back with
// target_scale and target_mean. Empty vectors mean identity.
struct Normalizer {
    std::vector<double> state_mean, state_scale;    // n
    std::vector<double> target_mean, target_scale;  // n + 1

    bool identity() const { return state_mean.empty(); }
    void validate(std::size_t state_width) const;
};

// Per-coordinate mean and standard deviation over `data`; a scale below 1e-8 becomes 1.
Normalizer fit_normalizer(std::span<const envs::Transition> data);
nlohmann::json normalizer_to_json(const Normalizer& z);
Normalizer normalizer_from_json(const nlohmann::json& j);

struct KernelOutput {
    nn::Matrix h;                       // batch x H, mean of per_kernel
    std::vector<nn::Matrix> per_kernel; // in kernel order
};

struct Prediction {
    KernelOutput latent;
    nn::Matrix s_pred;  // batch x n
    nn::Matrix r_pred;  // batch x 1
};

struct GraphOutput {
    nn::Var h;
    std::vector<nn::Var> per_kernel;
    nn::Var delta;   // predicted s_next - s
    nn::Var s_pred;
    nn::Var r_pred;
    nn::Var standardized;  // [delta, r] in normalizer units; the training loss compares this
};

// Decomposed world model: k latent kernels whose outputs are averaged, then decoded into the
// next state and reward.
//   non-recurrent kernel i:  h^i = MLP_i(s ++ a^{G_i})
//   recurrent kernel i:      h^i = GRU_i(h_prev, tanh-dense_i(s ++ a^{G_i}))
//   h = mean_i h^i,  s_pred = s + decoder(h) (or decoder(h)),  r_pred = reward_head(h)
// with the normalizer wrapped around inputs and outputs.
class D2PModel {
public:
    D2PModel(D2PModelConfig config, std::uint64_t init_seed);
    // Adopts existing parameters; throws InvalidInput if they do not fit the config.
    D2PModel(D2PModelConfig config, nn::ParamSet params);

    const D2PModelConfig& config() const { return config_; }
    const nn::ParamSet& params() const { return params_; }
    nn::ParamSet& params() { return params_; }
    std::size_t kernel_count() const { return config_.kernel_count(); }
    std::size_t parameter_count() const { return params_.scalar_count(); }
    bool recurrent() const { return config_.kernel_kind == KernelKind::recurrent; }
    // Index of the first tensor of kernel k; kernel tensors are contiguous.
    std::size_t kernel_param_offset(std::size_t k) const { return kernel_offsets_[k]; }
    std::size_t kernel_param_tensors() const;

    const Normalizer& normalizer() const { return normalizer_; }
    void set_normalizer(Normalizer z);

    // s: batch x n, a: batch x m, h_prev: batch x H (recurrent only, required there).
    GraphOutput graph(nn::Tape& tape, nn::Var s, nn::Var a, std::optional<nn::Var> h_prev) const;
    // Evaluation without recording; h_prev null means zeros for a recurrent model.
    Prediction forward(const nn::Matrix& s, const nn::Matrix& a, const nn::Matrix* h_prev = nullptr) const;

    nlohmann::json checkpoint() const;
    static D2PModel from_checkpoint(const nlohmann::json& doc);

private:
    void build_layout();

    D2PModelConfig config_;
    nn::ParamSet params_;
    Normalizer normalizer_;
    std::vector<std::size_t> kernel_offsets_;
    std::vector<std::vector<std::size_t>> kernel_inputs_;
    std::vector<std::size_t> reduction_order_;
    std::size_t decoder_offset_ = 0;
    std::size_t reward_offset_ = 0;
};

// Sub-action i holds a's coordinates at partition group i, ascending.
std::vector<std::vector<double>> split_action(std::span<const double> a, const sd2::Partition& partition);

struct StepOutput {
    KernelOutput latent;
    std::vector<double> s_pred;
    double r_pred = 0.0;
};

// Single-sample forwards. Each checks that the model is of the matching kind.
StepOutput d2p_forward_nonrec(const D2PModel& model, std::span<const double> s, std::span<const double> a);
StepOutput d2p_forward_rec(const D2PModel& model, std::span<const double> h_prev, std::span<const double> s,
                           std::span<const double> a);
StepOutput kernel_ensemble_forward(const D2PModel& model, std::span<const double> s, std::span<const double> a,
                                   std::span<const double> h_prev = {});
StepOutput monolithic_forward(const D2PModel& model, std::span<const double> s, std::span<const double> a,
                              std::span<const double> h_prev = {});

}  // namespace ed2::d2p
