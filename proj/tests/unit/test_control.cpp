#include "ed2/common/errors.hpp"
#include "ed2/common/rng.hpp"
#include "ed2/control/mbrl.hpp"
#include "ed2/control/planner.hpp"
#include "ed2/d2p/world_model.hpp"
#include "ed2/envs/block_env.hpp"
#include "ed2/envs/dataset.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace ed2;
using control::PlannerConfig;

namespace {

// Predicts NaN everywhere.
class BrokenModel : public d2p::WorldModel {
public:
    std::size_t state_width() const override { return 4; }
    std::size_t action_width() const override { return 2; }
    void predict(const nn::Matrix& s, const nn::Matrix&, nn::Matrix*, nn::Matrix& s_next, nn::Matrix& r) const override {
        s_next = nn::Matrix::Constant(s.rows(), 4, std::numeric_limits<double>::quiet_NaN());
        r = nn::Matrix::Zero(s.rows(), 1);
    }
    std::vector<double> fit(std::span<const envs::Transition>, std::size_t) override { return {}; }
};

control::MbrlLoopConfig quick_loop() {
    control::MbrlLoopConfig c;
    c.outer_iterations = 2;
    c.initial_episodes = 2;
    c.episodes_per_iteration = 1;
    c.train_steps = 20;
    c.planner = PlannerConfig::cem_defaults(3, 20);
    c.latent_width = c.kernel_hidden = c.decoder_hidden = 8;
    c.hyper.batch = 16;
    return c;
}

}  // namespace

TEST_CASE("plan_action: one-step optimum of the quadratic reward") {
    // With zero velocity and no coupling, p' = p + beta * M a per block, reward -|p'|^2.
    // Placing p = -beta * M a* makes a* the unique maximizer.
    const auto spec = envs::preset("blocks-2x3");
    const d2p::OracleModel oracle(spec);
    Rng rng(3);
    std::uniform_real_distribution<double> inner(-0.6, 0.6);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> target(6), s(12, 0.0);
        for (double& x : target) x = inner(rng);
        for (std::size_t j = 0; j < spec.blocks.size(); ++j) {
            const auto& b = spec.blocks[j];
            for (std::size_t r = 0; r < b.size(); ++r) {
                double drive = 0.0;
                for (std::size_t c = 0; c < b.size(); ++c) drive += spec.mixing[j](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * target[b[c]];
                s[2 * b[r]] = -spec.beta * drive;
            }
        }
        const auto plan = control::plan_action(oracle, s, {}, PlannerConfig::cem_defaults(1, 1000), static_cast<std::uint64_t>(trial));
        double worst = 0.0;
        for (std::size_t i = 0; i < 6; ++i) worst = std::max(worst, std::fabs(plan.action[i] - target[i]));
        CHECK(worst < 0.1);
        CHECK_FALSE(plan.fell_back);
    }
}

TEST_CASE("plan_action: population 1 returns its single sample") {
    const auto spec = envs::preset("blocks-3x2");
    const d2p::OracleModel oracle(spec);
    const auto s = envs::env_reset(spec, 4);
    const auto plan = control::plan_action(oracle, s, {}, PlannerConfig::random_shooting(3, 1), 77);
    const std::uint64_t key = derive_seed(77, "planner");
    for (std::size_t i = 0; i < 6; ++i) CHECK(plan.action[i] == 2.0 * counter_uniform(key, 0, 0, i) - 1.0);
    auto cem = PlannerConfig::cem_defaults(3, 1);
    cem.iterations = 1;
    const auto one = control::plan_action(oracle, s, {}, cem, 77);
    // A single elite: the refit mean is that sample, clamped.
    for (std::size_t i = 0; i < 6; ++i) {
        const double u1 = counter_uniform(key, 0, 0, 2 * i), u2 = counter_uniform(key, 0, 0, 2 * i + 1);
        const double z = std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * M_PI * u2);
        CHECK(one.action[i] == doctest::Approx(std::clamp(cem.init_std * z, -1.0, 1.0)).epsilon(1e-15));
    }
}

TEST_CASE("plan_action: deterministic per seed and always within bounds") {
    const auto spec = envs::preset("blocks-4x2-coupled");
    const d2p::OracleModel oracle(spec);
    const auto s = envs::env_reset(spec, 5);
    auto cfg = PlannerConfig::cem_defaults(4, 50);
    cfg.init_std = 10.0;
    const auto a = control::plan_action(oracle, s, {}, cfg, 1);
    CHECK(a.action == control::plan_action(oracle, s, {}, cfg, 1).action);
    CHECK(a.action != control::plan_action(oracle, s, {}, cfg, 2).action);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (auto c : {cfg, PlannerConfig::random_shooting(4, 50)}) {
            for (double x : control::plan_action(oracle, s, {}, c, seed).action) {
                CHECK(x >= -1.0);
                CHECK(x <= 1.0);
            }
        }
    }
}

TEST_CASE("plan_action: a larger population never lowers the best score") {
    const auto spec = envs::preset("blocks-2x3");
    const d2p::OracleModel oracle(spec);
    const auto s = envs::env_reset(spec, 6);
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t pop : {1, 2, 5, 10, 50, 200, 1000}) {
        const double best = control::plan_action(oracle, s, {}, PlannerConfig::random_shooting(5, pop), 3).best_score;
        CHECK(best >= prev);
        prev = best;
    }
}

TEST_CASE("plan_action: non-finite predictions fall back to the zero action") {
    const BrokenModel broken;
    const std::vector<double> s(4, 0.1);
    const auto plan = control::plan_action(broken, s, {}, PlannerConfig::cem_defaults(2, 10), 0);
    CHECK(plan.fell_back);
    CHECK(plan.action == std::vector<double>{0.0, 0.0});
}

TEST_CASE("planner config: validation and JSON") {
    auto c = PlannerConfig::cem_defaults(8, 300);
    CHECK(c.elites == 30);
    CHECK(c.iterations == 3);
    CHECK(control::planner_from_json(control::planner_to_json(c)).population == 300);
    c.elites = 301;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    CHECK_THROWS_AS(control::planner_from_json({{"mode", "greedy"}}), InvalidInput);
    CHECK_THROWS_AS(control::planner_from_json({{"horizon", 0}}), InvalidInput);
}

TEST_CASE("partition source: parse and resolve") {
    using K = control::PartitionSource::Kind;
    CHECK(control::PartitionSource::parse("clustered").kind == K::clustered);
    CHECK(control::PartitionSource::parse("random:3").random_k == 3);
    CHECK(control::PartitionSource::parse("prior:/tmp/p.json").prior_path == "/tmp/p.json");
    for (const char* bad : {"random:", "random:0", "random:x", "prior:", "kmeans"}) {
        CHECK_THROWS_AS(control::PartitionSource::parse(bad), InvalidInput);
    }
    const auto spec = envs::preset("blocks-3x2");
    const auto data = envs::collect_random(spec, 5, 0);
    CHECK(control::resolve_partition(control::PartitionSource::parse("complete"), data, 0.0, 0).size() == 6);
    CHECK(control::resolve_partition(control::PartitionSource::parse("monolithic"), data, 0.0, 0).size() == 1);
    CHECK(control::resolve_partition(control::PartitionSource::parse("random:2"), data, 0.0, 0).size() == 2);
    CHECK(control::resolve_partition(control::PartitionSource::parse("clustered"), data, 0.0, 0) ==
          sd2::Partition::from_groups({{0, 1}, {2, 3}, {4, 5}}, 6));
}

TEST_CASE("run_mbrl: one iteration records the random-policy baseline") {
    const auto spec = envs::preset("blocks-2x3");
    auto c = quick_loop();
    c.outer_iterations = 1;
    c.initial_episodes = 4;
    const auto r = control::run_mbrl(spec, c, 3);
    REQUIRE(r.curve.size() == 1);
    CHECK_FALSE(r.model.has_value());
    const auto rand = control::random_returns(spec, 4, 3);
    CHECK(r.curve[0].returns == rand);
    double mean = 0.0;
    for (double x : rand) mean += x / 4.0;
    CHECK(r.final_return() == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("run_mbrl: deterministic, grows the curve, keeps the model") {
    const auto spec = envs::preset("blocks-2x3");
    const auto c = quick_loop();
    const auto a = control::run_mbrl(spec, c, 1);
    const auto b = control::run_mbrl(spec, c, 1);
    REQUIRE(a.curve.size() == 2);
    CHECK(a.curve[1].returns.size() == 1);
    CHECK(a.curve[1].returns == b.curve[1].returns);
    REQUIRE(a.model.has_value());
    CHECK(a.model->params() == b.model->params());
    CHECK(a.partition == sd2::Partition::from_groups({{0, 1, 2}, {3, 4, 5}}, 6));
    CHECK(control::learning_curve_csv(a).rfind("iteration,mean_return,std_return\n0,", 0) == 0);
}

TEST_CASE("run_mbrl: complete and monolithic coincide on a single-action env") {
    const auto spec = envs::make_block_env("one", {{0}}, 0.7, 0.3, 0.0, 10, 0);
    auto c = quick_loop();
    c.partition = control::PartitionSource::parse("complete");
    const auto complete = control::run_mbrl(spec, c, 2);
    c.partition = control::PartitionSource::parse("monolithic");
    const auto mono = control::run_mbrl(spec, c, 2);
    CHECK(complete.partition == mono.partition);
    CHECK(complete.model_config.parameter_count() == mono.model_config.parameter_count());
    CHECK(complete.curve[1].returns == mono.curve[1].returns);
    CHECK(complete.model->params() == mono.model->params());
}

TEST_CASE("run_mbrl: MPC on the true dynamics is near the best achievable MPC return") {
    const auto spec = envs::preset("blocks-2x3");
    const d2p::OracleModel oracle(spec);
    const auto defaults = control::mpc_returns(spec, oracle, PlannerConfig::cem_defaults(8, 300), 5, 0);
    auto strong = PlannerConfig::cem_defaults(8, 1000);
    strong.iterations = 6;
    const auto best = control::mpc_returns(spec, oracle, strong, 5, 0);
    double d = 0.0, b = 0.0;
    for (std::size_t e = 0; e < 5; ++e) {
        d += defaults[e];
        b += best[e];
    }
    double rnd = 0.0;
    for (double x : control::random_returns(spec, 5, 0)) rnd += x;
    MESSAGE("oracle MPC " << d / 5 << ", stronger planner " << b / 5 << ", random policy " << rnd / 5);
    // Returns are costs near zero, so the 5% is taken on the random-to-best scale.
    CHECK(std::fabs(d - b) <= 0.05 * std::fabs(b - rnd));
}

TEST_CASE("run_mbrl: failures name the iteration") {
    const auto spec = envs::preset("blocks-2x3");
    auto c = quick_loop();
    c.hyper.lr = 1e200;
    c.hyper.normalize = false;
    try {
        control::run_mbrl(spec, c, 0);
        FAIL("expected failure");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).rfind("mbrl iteration 1:", 0) == 0);
    }
    c = quick_loop();
    c.train_steps = 0;
    CHECK_THROWS_AS(control::run_mbrl(spec, c, 0), InvalidInput);
}
