#pragma once

#include "ed2/envs/block_env.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ed2::envs {

struct Transition {
    State s;
    Action a;
    double r = 0.0;
    State s_next;
    std::int64_t episode_id = 0;
    std::int64_t t = 0;

    bool operator==(const Transition&) const = default;
};

struct DatasetMeta {
    std::string env;
    std::size_t n = 0;  // state width
    std::size_t m = 0;  // action width
    std::uint64_t seed = 0;
    std::string policy;     // optional in files
    std::string spec_hash;  // optional in files

    bool operator==(const DatasetMeta&) const = default;
};

// Transitions in generation order: strictly increasing (episode_id, t).
struct Dataset {
    DatasetMeta meta;
    std::vector<Transition> transitions;

    std::size_t size() const { return transitions.size(); }
    bool empty() const { return transitions.empty(); }
    bool operator==(const Dataset&) const = default;
};

using Policy = std::function<Action(std::span<const double> state)>;

// Uniform in [-1, 1]^m, its own stream seeded by `seed`.
Policy uniform_random_policy(std::size_t action_width, std::uint64_t seed);

// Episode e starts from env_reset(spec, derive_seed(seed, e)) and runs spec.horizon steps.
// With no policy the uniform random policy seeded from the "policy" sub-stream is used.
// Throws InvalidInput if episodes == 0 or the policy returns a wrong-width action.
Dataset collect_trajectories(const BlockEnvSpec& spec, const Policy& policy, std::size_t episodes,
                             std::uint64_t seed, std::string policy_name = "uniform_random");
Dataset collect_random(const BlockEnvSpec& spec, std::size_t episodes, std::uint64_t seed);

// JSON Lines. Line 1: {"env","n","m","seed",...}; then one {"ep","t","s","a","r","s2"} per line.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::string dataset_to_jsonl(const Dataset& dataset);

// Throws ParseError naming the first malformed line.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::istream& in);

// Throws InvalidInput when widths, finiteness or ordering are violated.
void validate_dataset(const Dataset& dataset);

}  // namespace ed2::envs
