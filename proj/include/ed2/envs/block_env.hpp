#pragma once

#include "ed2/nn/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ed2::envs {

// Linear point-mass system whose action dimensions are split into independent blocks.
//
// Action dimension i owns the state pair (position, velocity) at indices (2i, 2i+1).
// For block j with action indices G_j and mixing matrix M_j:
//   v' = alpha * v + beta * M_j a^{G_j} + gamma * (mean velocity outside block j)
//   p' = p + v'
// and the reward is -sum(p'^2) over all positions. Actions are clipped to [-1, 1].
struct BlockEnvSpec {
    std::string name;
    std::vector<std::vector<std::size_t>> blocks;  // 0-based action indices; the true partition
    double alpha = 0.7;                            // velocity damping, in (0, 1)
    double beta = 0.3;                             // action gain
    double gamma = 0.0;                            // cross-block coupling, >= 0
    std::vector<nn::Matrix> mixing;                // one |G_j| x |G_j| matrix per block
    std::size_t horizon = 20;
    std::uint64_t seed = 0;                        // seed the mixing matrices were drawn from

    std::size_t action_width() const;
    std::size_t state_width() const { return 2 * action_width(); }
    void validate() const;
    // Stable fingerprint of every field, as 16 hex digits.
    std::string hash() const;
};

// Builds a spec whose mixing matrices are random orthonormal matrices (Haar via QR of a
// Gaussian draw) with every entry of magnitude >= 0.3/sqrt(|G_j|), drawn from `seed`.
BlockEnvSpec make_block_env(std::string name, std::vector<std::vector<std::size_t>> blocks, double alpha,
                            double beta, double gamma, std::size_t horizon, std::uint64_t seed);

// "blocks-2x3", "blocks-3x2", "blocks-4x2-coupled". Throws InvalidInput listing valid names.
BlockEnvSpec preset(std::string_view name);
std::vector<std::string> preset_names();

nlohmann::json spec_to_json(const BlockEnvSpec& spec);
// Accepts 1-based "blocks"; "mixing" is optional and drawn from "seed" when absent.
BlockEnvSpec spec_from_json(const nlohmann::json& j);
BlockEnvSpec load_spec(const std::filesystem::path& path);

using State = std::vector<double>;
using Action = std::vector<double>;

struct StepResult {
    State next_state;
    double reward = 0.0;
};

// Positions uniform in [-1, 1], velocities zero; a pure function of the seed.
State env_reset(const BlockEnvSpec& spec, std::uint64_t seed);

// Throws InvalidInput for wrong widths or non-finite inputs.
StepResult env_step(const BlockEnvSpec& spec, std::span<const double> state, std::span<const double> action);

}  // namespace ed2::envs
