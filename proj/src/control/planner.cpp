#include "ed2/control/planner.hpp"

#include "ed2/common/errors.hpp"
#include "ed2/common/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>

namespace ed2::control {

using nn::Matrix;

std::string to_string(PlannerMode m) { return m == PlannerMode::cem ? "cem" : "random_shooting"; }

PlannerMode planner_mode_from_string(const std::string& s) {
    if (s == "cem") return PlannerMode::cem;
    if (s == "random_shooting") return PlannerMode::random_shooting;
    throw InvalidInput("unknown planner mode '" + s + "' (random_shooting, cem)");
}

PlannerConfig PlannerConfig::cem_defaults(std::size_t horizon, std::size_t population) {
    PlannerConfig c;
    c.mode = PlannerMode::cem;
    c.horizon = horizon;
    c.population = population;
    c.elites = std::max<std::size_t>(1, population / 10);
    c.iterations = 3;
    return c;
}

PlannerConfig PlannerConfig::random_shooting(std::size_t horizon, std::size_t population) {
    PlannerConfig c;
    c.mode = PlannerMode::random_shooting;
    c.horizon = horizon;
    c.population = population;
    c.elites = 1;
    c.iterations = 1;
    return c;
}

void PlannerConfig::validate() const {
    if (horizon == 0) throw InvalidInput("planner: horizon must be >= 1");
    if (population == 0) throw InvalidInput("planner: population must be >= 1");
    if (elites == 0 || elites > population) throw InvalidInput("planner: elites must be in [1, population]");
    if (iterations == 0) throw InvalidInput("planner: iterations must be >= 1");
    if (!(init_std > 0.0) || !std::isfinite(init_std)) throw InvalidInput("planner: init_std must be > 0");
}

nlohmann::json planner_to_json(const PlannerConfig& c) {
    return {{"horizon", c.horizon},   {"population", c.population}, {"elites", c.elites},
            {"iterations", c.iterations}, {"mode", to_string(c.mode)}, {"init_std", c.init_std}};
}

PlannerConfig planner_from_json(const nlohmann::json& j, PlannerConfig base) {
    try {
        if (j.contains("mode")) base.mode = planner_mode_from_string(j.at("mode").get<std::string>());
        base.horizon = j.value("horizon", base.horizon);
        base.population = j.value("population", base.population);
        base.elites = j.value("elites", base.elites);
        base.iterations = j.value("iterations", base.iterations);
        base.init_std = j.value("init_std", base.init_std);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("planner config: ") + e.what());
    }
    base.validate();
    return base;
}

namespace {

// Predicted return of every row of `actions[t]` (population x m per step). Returns false when
// any prediction is non-finite.
bool score_population(const d2p::WorldModel& model, std::span<const double> s, std::span<const double> h,
                      const std::vector<Matrix>& actions, std::vector<double>& scores) {
    const auto pop = actions.front().rows();
    const auto n = static_cast<Eigen::Index>(s.size());
    Matrix state(pop, n);
    for (Eigen::Index r = 0; r < pop; ++r) {
        for (Eigen::Index j = 0; j < n; ++j) state(r, j) = s[static_cast<std::size_t>(j)];
    }
    const auto latent = static_cast<Eigen::Index>(model.latent_width());
    Matrix hid;
    if (latent > 0) {
        hid = Matrix::Zero(pop, latent);
        if (!h.empty()) {
            if (static_cast<Eigen::Index>(h.size()) != latent) throw InvalidInput("plan_action: latent width mismatch");
            for (Eigen::Index r = 0; r < pop; ++r) {
                for (Eigen::Index j = 0; j < latent; ++j) hid(r, j) = h[static_cast<std::size_t>(j)];
            }
        }
    }
    scores.assign(static_cast<std::size_t>(pop), 0.0);
    Matrix next, reward;
    for (const auto& a : actions) {
        model.predict(state, a, latent > 0 ? &hid : nullptr, next, reward);
        if (!next.allFinite() || !reward.allFinite()) return false;
        for (Eigen::Index r = 0; r < pop; ++r) scores[static_cast<std::size_t>(r)] += reward(r, 0);
        state = std::move(next);
    }
    for (double x : scores) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

PlanResult fallback(std::size_t m) {
    PlanResult r;
    r.action.assign(m, 0.0);
    r.best_score = -std::numeric_limits<double>::infinity();
    r.fell_back = true;
    return r;
}

}  // namespace

PlanResult plan_action(const d2p::WorldModel& model, std::span<const double> s, std::span<const double> h,
                       const PlannerConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t m = model.action_width();
    if (s.size() != model.state_width()) throw InvalidInput("plan_action: state width mismatch");
    const std::uint64_t key = derive_seed(seed, "planner");
    const auto pop = static_cast<Eigen::Index>(cfg.population);
    const auto mw = static_cast<Eigen::Index>(m);
    const std::size_t iterations = cfg.mode == PlannerMode::cem ? cfg.iterations : 1;

    std::vector<Matrix> mean(cfg.horizon, Matrix::Zero(1, mw));
    std::vector<Matrix> spread(cfg.horizon, Matrix::Constant(1, mw, cfg.init_std));
    std::vector<Matrix> actions(cfg.horizon, Matrix(pop, mw));
    std::vector<double> scores;
    PlanResult result;
    result.best_score = -std::numeric_limits<double>::infinity();

    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t t = 0; t < cfg.horizon; ++t) {
            for (Eigen::Index c = 0; c < pop; ++c) {
                for (Eigen::Index i = 0; i < mw; ++i) {
                    const std::uint64_t slot = static_cast<std::uint64_t>(t * m + static_cast<std::size_t>(i));
                    double a;
                    if (cfg.mode == PlannerMode::random_shooting) {
                        a = 2.0 * counter_uniform(key, it, static_cast<std::uint64_t>(c), slot) - 1.0;
                    } else {
                        const double u1 = counter_uniform(key, it, static_cast<std::uint64_t>(c), 2 * slot);
                        const double u2 = counter_uniform(key, it, static_cast<std::uint64_t>(c), 2 * slot + 1);
                        const double z = std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
                        a = mean[t](0, i) + spread[t](0, i) * z;
                    }
                    actions[t](c, i) = std::clamp(a, -1.0, 1.0);
                }
            }
        }
        if (!score_population(model, s, h, actions, scores)) return fallback(m);

        std::size_t best = 0;
        for (std::size_t c = 1; c < scores.size(); ++c) {
            if (scores[c] > scores[best]) best = c;
        }
        if (scores[best] > result.best_score) {
            result.best_score = scores[best];
            if (cfg.mode == PlannerMode::random_shooting) {
                result.action.assign(m, 0.0);
                for (std::size_t i = 0; i < m; ++i) result.action[i] = actions[0](static_cast<Eigen::Index>(best), static_cast<Eigen::Index>(i));
            }
        }
        if (cfg.mode == PlannerMode::cem) {
            std::vector<std::size_t> order(scores.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
            const double k = static_cast<double>(cfg.elites);
            for (std::size_t t = 0; t < cfg.horizon; ++t) {
                Matrix mu = Matrix::Zero(1, mw);
                for (std::size_t e = 0; e < cfg.elites; ++e) mu += actions[t].row(static_cast<Eigen::Index>(order[e]));
                mu /= k;
                Matrix var = Matrix::Zero(1, mw);
                for (std::size_t e = 0; e < cfg.elites; ++e) {
                    const Matrix d = actions[t].row(static_cast<Eigen::Index>(order[e])) - mu;
                    var += d.cwiseProduct(d);
                }
                mean[t] = mu;
                spread[t] = (var / k).cwiseSqrt().cwiseMax(1e-3);
            }
        }
    }
    if (cfg.mode == PlannerMode::cem) {
        result.action.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) result.action[i] = std::clamp(mean[0](0, static_cast<Eigen::Index>(i)), -1.0, 1.0);
    }
    return result;
}

}  // namespace ed2::control
