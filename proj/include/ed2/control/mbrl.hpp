#pragma once

#include "ed2/control/planner.hpp"
#include "ed2/d2p/model.hpp"
#include "ed2/d2p/train.hpp"
#include "ed2/envs/block_env.hpp"
#include "ed2/sd2/cluster.hpp"
#include "ed2/sd2/partition.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ed2::control {

// Where the model's action partition comes from:
//   clustered | complete | prior:<path> | random:<k> | monolithic
struct PartitionSource {
    enum class Kind { clustered, complete, prior, random, monolithic };
    Kind kind = Kind::clustered;
    std::string prior_path;
    std::size_t random_k = 0;

    static PartitionSource parse(const std::string& text);
    std::string to_string() const;
};

struct MbrlLoopConfig {
    std::size_t outer_iterations = 10;  // iteration 0 is random data collection
    std::size_t initial_episodes = 5;
    std::size_t episodes_per_iteration = 2;
    std::size_t train_steps = 1000;     // per outer iteration, on all data so far
    PlannerConfig planner = PlannerConfig::cem_defaults(8, 300);
    PartitionSource partition;
    double eta = sd2::kDefaultEta;
    d2p::KernelKind kernel_kind = d2p::KernelKind::nonrecurrent;
    std::size_t latent_width = 64;
    std::size_t kernel_hidden = 64;
    std::size_t decoder_hidden = 64;
    std::size_t match_parameters = 0;   // > 0: kernel_hidden re-chosen to hit this count (within 5%)
    d2p::TrainHyper hyper;              // hyper.seed is replaced by the run seed

    void validate() const;
};

nlohmann::json loop_to_json(const MbrlLoopConfig& c);
MbrlLoopConfig loop_from_json(const nlohmann::json& j, MbrlLoopConfig base = {});

struct IterationStats {
    std::size_t iteration = 0;
    double mean_return = 0.0;
    double std_return = 0.0;  // population standard deviation over the iteration's episodes
    std::vector<double> returns;
    std::size_t planner_fallbacks = 0;
};

struct MbrlResult {
    std::vector<IterationStats> curve;
    sd2::Partition partition;
    d2p::D2PModelConfig model_config;
    std::optional<d2p::D2PModel> model;  // absent when only random data was collected

    double final_return() const { return curve.back().mean_return; }
};

sd2::Partition resolve_partition(const PartitionSource& source, const envs::Dataset& random_data, double eta,
                                 std::uint64_t seed);

// Iteration 0 collects random-policy episodes (and runs SD2 once when the source is
// "clustered"); every later iteration trains the model on all data so far and then collects
// MPC episodes with it. Failures are rethrown as std::runtime_error naming the iteration.
MbrlResult run_mbrl(const envs::BlockEnvSpec& spec, const MbrlLoopConfig& cfg, std::uint64_t seed);

// Returns of MPC episodes under a fixed model, e.g. the true-environment oracle.
std::vector<double> mpc_returns(const envs::BlockEnvSpec& spec, const d2p::WorldModel& model,
                                const PlannerConfig& planner, std::size_t episodes, std::uint64_t seed);
std::vector<double> random_returns(const envs::BlockEnvSpec& spec, std::size_t episodes, std::uint64_t seed);

// "iteration,mean_return,std_return" rows.
std::string learning_curve_csv(const MbrlResult& result);

}  // namespace ed2::control
