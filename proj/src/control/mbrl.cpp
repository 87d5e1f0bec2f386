#include "ed2/control/mbrl.hpp"

#include "ed2/common/errors.hpp"
#include "ed2/common/numfmt.hpp"
#include "ed2/common/rng.hpp"
#include "ed2/d2p/world_model.hpp"
#include "ed2/envs/dataset.hpp"
#include "ed2/sd2/cluster.hpp"
#include "ed2/sd2/features.hpp"

#include <charconv>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace ed2::control {

using nn::Matrix;

PartitionSource PartitionSource::parse(const std::string& text) {
    PartitionSource p;
    if (text == "clustered") {
        p.kind = Kind::clustered;
    } else if (text == "complete") {
        p.kind = Kind::complete;
    } else if (text == "monolithic") {
        p.kind = Kind::monolithic;
    } else if (text.rfind("prior:", 0) == 0 && text.size() > 6) {
        p.kind = Kind::prior;
        p.prior_path = text.substr(6);
    } else if (text.rfind("random:", 0) == 0) {
        p.kind = Kind::random;
        const char* first = text.data() + 7;
        const char* last = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(first, last, p.random_k);
        if (ec != std::errc() || ptr != last || first == last || p.random_k == 0) {
            throw InvalidInput("partition source '" + text + "': random:<k> needs a positive integer k");
        }
    } else {
        throw InvalidInput("unknown partition source '" + text +
                           "' (clustered, complete, prior:<path>, random:<k>, monolithic)");
    }
    return p;
}

std::string PartitionSource::to_string() const {
    switch (kind) {
        case Kind::clustered: return "clustered";
        case Kind::complete: return "complete";
        case Kind::prior: return "prior:" + prior_path;
        case Kind::random: return "random:" + std::to_string(random_k);
        case Kind::monolithic: return "monolithic";
    }
    return "clustered";
}

void MbrlLoopConfig::validate() const {
    if (outer_iterations == 0 || initial_episodes == 0 || episodes_per_iteration == 0 || train_steps == 0) {
        throw InvalidInput("mbrl: iteration, episode and step counts must be >= 1");
    }
    if (latent_width == 0 || kernel_hidden == 0 || decoder_hidden == 0) {
        throw InvalidInput("mbrl: model widths must be >= 1");
    }
    planner.validate();
}

nlohmann::json loop_to_json(const MbrlLoopConfig& c) {
    return {{"outer_iterations", c.outer_iterations},
            {"initial_episodes", c.initial_episodes},
            {"episodes_per_iteration", c.episodes_per_iteration},
            {"train_steps", c.train_steps},
            {"planner", planner_to_json(c.planner)},
            {"partition", c.partition.to_string()},
            {"eta", c.eta},
            {"kernel_kind", d2p::to_string(c.kernel_kind)},
            {"latent_width", c.latent_width},
            {"kernel_hidden", c.kernel_hidden},
            {"decoder_hidden", c.decoder_hidden},
            {"match_parameters", c.match_parameters},
            {"batch", c.hyper.batch},
            {"lr", c.hyper.lr},
            {"lr_end_fraction", c.hyper.lr_end_fraction},
            {"seq_len", c.hyper.seq_len}};
}

MbrlLoopConfig loop_from_json(const nlohmann::json& j, MbrlLoopConfig c) {
    try {
        c.outer_iterations = j.value("outer_iterations", c.outer_iterations);
        c.initial_episodes = j.value("initial_episodes", c.initial_episodes);
        c.episodes_per_iteration = j.value("episodes_per_iteration", c.episodes_per_iteration);
        c.train_steps = j.value("train_steps", c.train_steps);
        if (j.contains("planner")) c.planner = planner_from_json(j.at("planner"), c.planner);
        if (j.contains("partition")) c.partition = PartitionSource::parse(j.at("partition").get<std::string>());
        c.eta = j.value("eta", c.eta);
        if (j.contains("kernel_kind")) c.kernel_kind = d2p::kernel_kind_from_string(j.at("kernel_kind").get<std::string>());
        c.latent_width = j.value("latent_width", c.latent_width);
        c.kernel_hidden = j.value("kernel_hidden", c.kernel_hidden);
        c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
        c.match_parameters = j.value("match_parameters", c.match_parameters);
        c.hyper.batch = j.value("batch", c.hyper.batch);
        c.hyper.lr = j.value("lr", c.hyper.lr);
        c.hyper.lr_end_fraction = j.value("lr_end_fraction", c.hyper.lr_end_fraction);
        c.hyper.seq_len = j.value("seq_len", c.hyper.seq_len);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("mbrl config: ") + e.what());
    }
    c.validate();
    return c;
}

sd2::Partition resolve_partition(const PartitionSource& source, const envs::Dataset& random_data, double eta,
                                 std::uint64_t seed) {
    const std::size_t m = random_data.meta.m;
    switch (source.kind) {
        case PartitionSource::Kind::clustered:
            return sd2::sd2_cluster(sd2::pearson_features(random_data), eta).partition;
        case PartitionSource::Kind::complete: return sd2::complete_decomposition(m);
        case PartitionSource::Kind::prior: return sd2::load_prior_partition(source.prior_path, m);
        case PartitionSource::Kind::random:
            return sd2::random_partition(m, source.random_k, derive_seed(seed, "random_partition"));
        case PartitionSource::Kind::monolithic: return sd2::single_group(m);
    }
    throw InvalidInput("unknown partition source");
}

namespace {

struct Stats {
    double mean = 0.0;
    double std = 0.0;
};

Stats stats(const std::vector<double>& xs) {
    Stats s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    for (double x : xs) s.std += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(s.std / static_cast<double>(xs.size()));
    return s;
}

struct EpisodeOutcome {
    double ret = 0.0;
    std::size_t fallbacks = 0;
};

// One MPC episode from env_reset(reset_seed); transitions are appended to `out` when given.
EpisodeOutcome mpc_episode(const envs::BlockEnvSpec& spec, const d2p::WorldModel& model, const PlannerConfig& planner,
                           std::uint64_t reset_seed, std::uint64_t planner_seed, std::int64_t episode_id,
                           std::vector<envs::Transition>* out) {
    EpisodeOutcome result;
    envs::State s = envs::env_reset(spec, reset_seed);
    const auto latent = static_cast<Eigen::Index>(model.latent_width());
    Matrix h = Matrix::Zero(1, latent);
    for (std::size_t t = 0; t < spec.horizon; ++t) {
        std::span<const double> hs;
        if (latent > 0) hs = std::span<const double>(h.data(), static_cast<std::size_t>(latent));
        PlanResult plan = plan_action(model, s, hs, planner, derive_seed(planner_seed, t));
        if (plan.fell_back) ++result.fallbacks;
        envs::StepResult step = envs::env_step(spec, s, plan.action);
        if (latent > 0) {
            // Advance the model's latent along the real transition.
            Matrix next, r;
            model.predict(nn::row_matrix(s), nn::row_matrix(plan.action), &h, next, r);
        }
        result.ret += step.reward;
        if (out != nullptr) {
            out->push_back({s, plan.action, step.reward, step.next_state, episode_id, static_cast<std::int64_t>(t)});
        }
        s = std::move(step.next_state);
    }
    return result;
}

d2p::D2PModelConfig model_config(const MbrlLoopConfig& cfg, const sd2::Partition& partition, std::size_t n) {
    d2p::D2PModelConfig c = cfg.partition.kind == PartitionSource::Kind::monolithic
                                ? d2p::D2PModelConfig::monolithic(n, partition.action_width())
                                : d2p::D2PModelConfig::decomposed(partition, n);
    c.kernel_kind = cfg.kernel_kind;
    c.latent_width = cfg.latent_width;
    c.kernel_hidden = cfg.kernel_hidden;
    c.decoder_hidden = cfg.decoder_hidden;
    if (cfg.match_parameters > 0) c = d2p::match_parameter_count(c, cfg.match_parameters);
    return c;
}

}  // namespace

MbrlResult run_mbrl(const envs::BlockEnvSpec& spec, const MbrlLoopConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    spec.validate();
    const std::uint64_t data_seed = derive_seed(seed, "data");
    const std::uint64_t planner_seed = derive_seed(seed, "planner");

    MbrlResult result;
    envs::Dataset data = envs::collect_random(spec, cfg.initial_episodes, data_seed);
    {
        IterationStats it0;
        it0.iteration = 0;
        for (std::size_t e = 0; e < cfg.initial_episodes; ++e) {
            double ret = 0.0;
            for (std::size_t t = 0; t < spec.horizon; ++t) ret += data.transitions[e * spec.horizon + t].r;
            it0.returns.push_back(ret);
        }
        const Stats st = stats(it0.returns);
        it0.mean_return = st.mean;
        it0.std_return = st.std;
        result.curve.push_back(std::move(it0));
    }
    result.partition = resolve_partition(cfg.partition, data, cfg.eta, seed);
    result.model_config = model_config(cfg, result.partition, spec.state_width());
    if (cfg.outer_iterations == 1) return result;

    d2p::TrainHyper hyper = cfg.hyper;
    hyper.seed = seed;
    d2p::LearnedModel model(d2p::D2PModel(result.model_config, seed), hyper);
    std::int64_t next_episode = static_cast<std::int64_t>(cfg.initial_episodes);

    for (std::size_t it = 1; it < cfg.outer_iterations; ++it) {
        try {
            model.fit(data.transitions, cfg.train_steps);
            IterationStats stats_it;
            stats_it.iteration = it;
            std::vector<envs::Transition> fresh;
            for (std::size_t e = 0; e < cfg.episodes_per_iteration; ++e) {
                const auto id = static_cast<std::uint64_t>(next_episode);
                EpisodeOutcome ep = mpc_episode(spec, model, cfg.planner, derive_seed(data_seed, id),
                                                derive_seed(planner_seed, id), next_episode, &fresh);
                stats_it.returns.push_back(ep.ret);
                stats_it.planner_fallbacks += ep.fallbacks;
                ++next_episode;
            }
            data.transitions.insert(data.transitions.end(), fresh.begin(), fresh.end());
            const Stats st = stats(stats_it.returns);
            stats_it.mean_return = st.mean;
            stats_it.std_return = st.std;
            result.curve.push_back(std::move(stats_it));
        } catch (const std::exception& e) {
            throw std::runtime_error("mbrl iteration " + std::to_string(it) + ": " + e.what());
        }
    }
    result.model = model.model();
    return result;
}

std::vector<double> mpc_returns(const envs::BlockEnvSpec& spec, const d2p::WorldModel& model,
                                const PlannerConfig& planner, std::size_t episodes, std::uint64_t seed) {
    std::vector<double> out;
    const std::uint64_t reset = derive_seed(seed, "data");
    const std::uint64_t plan = derive_seed(seed, "planner");
    for (std::size_t e = 0; e < episodes; ++e) {
        out.push_back(mpc_episode(spec, model, planner, derive_seed(reset, e), derive_seed(plan, e),
                                  static_cast<std::int64_t>(e), nullptr)
                          .ret);
    }
    return out;
}

std::vector<double> random_returns(const envs::BlockEnvSpec& spec, std::size_t episodes, std::uint64_t seed) {
    const envs::Dataset d = envs::collect_random(spec, episodes, derive_seed(seed, "data"));
    std::vector<double> out(episodes, 0.0);
    for (const auto& tr : d.transitions) out[static_cast<std::size_t>(tr.episode_id)] += tr.r;
    return out;
}

std::string learning_curve_csv(const MbrlResult& result) {
    std::string out = "iteration,mean_return,std_return\n";
    for (const auto& it : result.curve) {
        out += std::to_string(it.iteration) + ',' + format_double(it.mean_return) + ',' + format_double(it.std_return) + '\n';
    }
    return out;
}

}  // namespace ed2::control
