#pragma once

#include "ed2/d2p/world_model.hpp"
#include "ed2/envs/dataset.hpp"
#include "ed2/sd2/partition.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ed2::bench {

struct ExpandingSchedule {
    std::vector<double> fractions;  // strictly increasing in (0, 1], last == 1
    std::size_t steps_per_stage = 500;

    // `stages` equal steps: 1/stages, 2/stages, ..., 1.
    static ExpandingSchedule equal(std::size_t stages = 10, std::size_t steps_per_stage = 500);
    void validate() const;
};

struct ErrorPoint {
    std::size_t step = 0;  // cumulative training steps
    double mse = 0.0;
    std::optional<double> mse_rollout;
};

struct ErrorCurve {
    std::string label;
    std::uint64_t seed = 0;
    std::vector<ErrorPoint> points;

    void validate() const;
    double final_mse() const;
};

using ModelFactory = std::function<std::unique_ptr<d2p::WorldModel>(std::uint64_t seed)>;

struct ProtocolOptions {
    double eval_split = 0.2;       // most recent fraction of each prefix held out
    std::size_t min_train = 64;    // one batch; smaller training prefixes are rejected
    std::size_t rollout_horizon = 0;  // > 0 adds an H-step rollout MSE per stage
    std::size_t rollout_starts = 20;
};

// One model trained continuously while the visible prefix of `data` grows per schedule.
// At each stage the newest eval_split of the prefix is held out and the one-step MSE on it
// is recorded after training on the rest.
ErrorCurve expanding_error_protocol(const ModelFactory& factory, const envs::Dataset& data,
                                    const ExpandingSchedule& schedule, std::uint64_t seed, std::string label,
                                    const ProtocolOptions& options = {});

// Train/eval index ranges [0, train_end) and [train_end, prefix_end) of one stage.
struct StageSplit {
    std::size_t train_end = 0;
    std::size_t prefix_end = 0;
};
StageSplit stage_split(std::size_t dataset_size, double fraction, double eval_split);

// Mean squared state error at each of H closed-loop steps, from num_starts start states
// (reset plus a random-length random-action warm-up) under shared random action sequences.
std::vector<double> multistep_error(const d2p::WorldModel& model, const envs::BlockEnvSpec& spec,
                                    std::size_t horizon, std::size_t num_starts, std::uint64_t seed);

// Mean squared state error after `horizon` closed-loop steps along recorded episode stretches
// of `data`, from at most `max_starts` evenly spaced start points. NaN if no stretch fits.
double rollout_mse(const d2p::WorldModel& model, std::span<const envs::Transition> data, std::size_t horizon,
                   std::size_t max_starts);

struct LabelSummary {
    double mean_final_mse = 0.0;
    double std_final_mse = 0.0;  // sample standard deviation; 0 for a single seed
    std::size_t seeds = 0;
};

std::vector<std::pair<std::string, LabelSummary>> summarize(const std::vector<ErrorCurve>& curves);

// Writes curves.csv (label,seed,step,mse,mse_rollout), one curve-<label>-s<seed>.csv per
// curve, summary.json and manifest.json into `dir`. Returns the emitted file names.
std::vector<std::string> comparison_report(const std::vector<ErrorCurve>& curves, const std::filesystem::path& dir,
                                           const nlohmann::json& config = nlohmann::json::object());

// Filesystem-safe form of a label.
std::string file_stem(const std::string& label);

// ---- model line-up used by the comparisons ----

struct ModelSizes {
    std::size_t latent_width = 64;
    std::size_t kernel_hidden = 64;
    std::size_t decoder_hidden = 64;
    d2p::KernelKind kernel_kind = d2p::KernelKind::nonrecurrent;
};

struct ModelEntry {
    std::string label;
    d2p::D2PModelConfig config;
};

d2p::D2PModelConfig sized(d2p::D2PModelConfig config, const ModelSizes& sizes);

// D2P over `partition` plus the baselines requested by name, each matched to D2P's
// parameter count within 5%: "monolithic", "kernel_ensemble" (k = |partition|) and
// "random" (a random partition with |partition| groups, redrawn until it differs from
// `partition` when another one exists).
std::vector<ModelEntry> matched_lineup(const sd2::Partition& partition, std::size_t state_width,
                                       const ModelSizes& sizes, const std::vector<std::string>& baselines,
                                       std::uint64_t seed);

ModelFactory learned_factory(d2p::D2PModelConfig config, d2p::TrainHyper hyper);

// Training defaults for the comparison runs.
d2p::TrainHyper default_bench_hyper();

}  // namespace ed2::bench
