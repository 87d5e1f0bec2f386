#pragma once

#include "ed2/d2p/world_model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ed2::control {

enum class PlannerMode { random_shooting, cem };

std::string to_string(PlannerMode m);
PlannerMode planner_mode_from_string(const std::string& s);

struct PlannerConfig {
    std::size_t horizon = 8;
    std::size_t population = 300;
    std::size_t elites = 30;
    std::size_t iterations = 3;  // cem only
    PlannerMode mode = PlannerMode::cem;
    double init_std = 0.6;       // cem sampling spread around the running mean
    // Actions are confined to [-1, 1]^m.

    // CEM defaults: 10% elites, 3 iterations.
    static PlannerConfig cem_defaults(std::size_t horizon, std::size_t population);
    static PlannerConfig random_shooting(std::size_t horizon, std::size_t population);
    void validate() const;
};

nlohmann::json planner_to_json(const PlannerConfig& c);
PlannerConfig planner_from_json(const nlohmann::json& j, PlannerConfig base = {});

struct PlanResult {
    std::vector<double> action;
    double best_score = 0.0;  // best predicted cumulative reward among evaluated candidates
    bool fell_back = false;   // a non-finite prediction forced the zero action
};

// Scores candidate action sequences by predicted cumulative reward over the horizon.
// Candidate c of iteration i is drawn from a counter-based stream keyed on (seed, i, c), so
// a smaller population's candidates are a prefix of a larger one's.
// `h` is the model's current latent (ignored for stateless models; empty means zeros).
PlanResult plan_action(const d2p::WorldModel& model, std::span<const double> s, std::span<const double> h,
                       const PlannerConfig& cfg, std::uint64_t seed);

}  // namespace ed2::control
