#include "ed2/bench/bench.hpp"

#include "ed2/common/errors.hpp"
#include "ed2/common/io.hpp"
#include "ed2/common/numfmt.hpp"
#include "ed2/common/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ed2::bench {

ExpandingSchedule ExpandingSchedule::equal(std::size_t stages, std::size_t steps_per_stage) {
    if (stages == 0) throw InvalidInput("schedule: at least one stage is required");
    ExpandingSchedule s;
    for (std::size_t i = 1; i <= stages; ++i) {
        s.fractions.push_back(i == stages ? 1.0 : static_cast<double>(i) / static_cast<double>(stages));
    }
    s.steps_per_stage = steps_per_stage;
    return s;
}

void ExpandingSchedule::validate() const {
    if (fractions.empty()) throw InvalidInput("schedule: no fractions");
    double prev = 0.0;
    for (double f : fractions) {
        if (!(f > prev) || f > 1.0) throw InvalidInput("schedule: fractions must increase strictly within (0, 1]");
        prev = f;
    }
    if (fractions.back() != 1.0) throw InvalidInput("schedule: last fraction must be 1");
    if (steps_per_stage == 0) throw InvalidInput("schedule: steps_per_stage must be >= 1");
}

void ErrorCurve::validate() const {
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (points[i].step <= points[i - 1].step) throw InvalidInput("error curve '" + label + "': steps must increase");
    }
}

double ErrorCurve::final_mse() const {
    if (points.empty()) throw InvalidInput("error curve '" + label + "' has no points");
    return points.back().mse;
}

StageSplit stage_split(std::size_t dataset_size, double fraction, double eval_split) {
    if (!(eval_split > 0.0 && eval_split < 1.0)) throw InvalidInput("eval_split must be in (0, 1)");
    StageSplit s;
    s.prefix_end = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dataset_size)));
    if (s.prefix_end > dataset_size) s.prefix_end = dataset_size;
    const auto held = static_cast<std::size_t>(std::llround(eval_split * static_cast<double>(s.prefix_end)));
    s.train_end = s.prefix_end - held;
    return s;
}

namespace {

bool before(const envs::Transition& a, const envs::Transition& b) {
    return a.episode_id < b.episode_id || (a.episode_id == b.episode_id && a.t < b.t);
}

}  // namespace

ErrorCurve expanding_error_protocol(const ModelFactory& factory, const envs::Dataset& data,
                                    const ExpandingSchedule& schedule, std::uint64_t seed, std::string label,
                                    const ProtocolOptions& options) {
    schedule.validate();
    if (data.empty()) throw InvalidInput("expanding protocol: empty dataset");
    std::unique_ptr<d2p::WorldModel> model = factory(seed);
    if (!model) throw InvalidInput("expanding protocol: factory returned no model");

    ErrorCurve curve;
    curve.label = std::move(label);
    curve.seed = seed;
    std::span<const envs::Transition> all(data.transitions);
    std::size_t steps = 0;
    for (std::size_t stage = 0; stage < schedule.fractions.size(); ++stage) {
        const StageSplit split = stage_split(all.size(), schedule.fractions[stage], options.eval_split);
        const std::size_t eval_count = split.prefix_end - split.train_end;
        if (split.train_end < options.min_train || split.train_end == 0) {
            throw InvalidInput("expanding protocol: stage " + std::to_string(stage + 1) + " trains on " +
                               std::to_string(split.train_end) + " transitions, fewer than one batch (" +
                               std::to_string(options.min_train) + ")");
        }
        if (eval_count == 0) {
            throw InvalidInput("expanding protocol: stage " + std::to_string(stage + 1) + " has no held-out transitions");
        }
        auto train = all.subspan(0, split.train_end);
        auto eval = all.subspan(split.train_end, eval_count);
        // Everything held out is strictly newer than everything trained on.
        if (!before(train.back(), eval.front())) {
            throw std::logic_error("expanding protocol: train and eval sets overlap at stage " + std::to_string(stage + 1));
        }
        model->fit(train, schedule.steps_per_stage);
        steps += schedule.steps_per_stage;
        ErrorPoint p;
        p.step = steps;
        p.mse = d2p::one_step_mse(*model, eval);
        if (options.rollout_horizon > 0) {
            const double r = rollout_mse(*model, eval, options.rollout_horizon, options.rollout_starts);
            if (std::isfinite(r)) p.mse_rollout = r;
        }
        curve.points.push_back(p);
    }
    return curve;
}

double rollout_mse(const d2p::WorldModel& model, std::span<const envs::Transition> data, std::size_t horizon,
                   std::size_t max_starts) {
    if (horizon == 0) throw InvalidInput("rollout_mse: horizon must be >= 1");
    const auto starts = d2p::sequence_starts(data, horizon);
    if (starts.empty() || max_starts == 0) return std::nan("");
    const std::size_t count = std::min(max_starts, starts.size());
    double total = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t st = starts[k * starts.size() / count];
        std::vector<std::vector<double>> actions;
        for (std::size_t t = 0; t < horizon; ++t) actions.push_back(data[st + t].a);
        const auto out = d2p::rollout(model, data[st].s, actions);
        const auto& truth = data[st + horizon - 1].s_next;
        double err = 0.0;
        for (std::size_t j = 0; j < truth.size(); ++j) {
            const double d = out.states.back()[j] - truth[j];
            err += d * d;
        }
        total += err / static_cast<double>(truth.size());
    }
    return total / static_cast<double>(count);
}

std::vector<double> multistep_error(const d2p::WorldModel& model, const envs::BlockEnvSpec& spec,
                                    std::size_t horizon, std::size_t num_starts, std::uint64_t seed) {
    if (horizon == 0) throw InvalidInput("multistep_error: horizon must be >= 1");
    const std::size_t m = spec.action_width();
    const std::size_t n = spec.state_width();
    std::vector<double> err(horizon, 0.0);
    if (num_starts == 0) return err;
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (std::size_t i = 0; i < num_starts; ++i) {
        const std::uint64_t start_seed = derive_seed(seed, i);
        Rng rng = make_rng(start_seed, "actions");
        std::vector<double> s = envs::env_reset(spec, start_seed);
        const std::size_t warmup = spec.horizon > horizon
                                       ? std::uniform_int_distribution<std::size_t>(0, spec.horizon - horizon)(rng)
                                       : 0;
        std::vector<double> a(m);
        for (std::size_t t = 0; t < warmup; ++t) {
            for (auto& x : a) x = unit(rng);
            s = envs::env_step(spec, s, a).next_state;
        }
        std::vector<std::vector<double>> actions(horizon, std::vector<double>(m));
        for (auto& act : actions) {
            for (auto& x : act) x = unit(rng);
        }
        const auto predicted = d2p::rollout(model, s, actions);
        std::vector<double> truth = s;
        for (std::size_t t = 0; t < horizon; ++t) {
            truth = envs::env_step(spec, truth, actions[t]).next_state;
            double e = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = predicted.states[t][j] - truth[j];
                e += d * d;
            }
            err[t] += e / static_cast<double>(n);
        }
    }
    for (auto& e : err) e /= static_cast<double>(num_starts);
    return err;
}

std::vector<std::pair<std::string, LabelSummary>> summarize(const std::vector<ErrorCurve>& curves) {
    std::vector<std::pair<std::string, std::vector<double>>> finals;
    for (const auto& c : curves) {
        auto it = std::find_if(finals.begin(), finals.end(), [&](const auto& e) { return e.first == c.label; });
        if (it == finals.end()) {
            finals.push_back({c.label, {}});
            it = finals.end() - 1;
        }
        it->second.push_back(c.final_mse());
    }
    std::vector<std::pair<std::string, LabelSummary>> out;
    for (const auto& [label, values] : finals) {
        LabelSummary s;
        s.seeds = values.size();
        double sum = 0.0;
        for (double v : values) sum += v;
        s.mean_final_mse = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - s.mean_final_mse) * (v - s.mean_final_mse);
            s.std_final_mse = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        out.emplace_back(label, s);
    }
    return out;
}

std::string file_stem(const std::string& label) {
    std::string out;
    for (char c : label) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        out += ok ? c : '_';
    }
    return out.empty() ? "curve" : out;
}

namespace {

std::string curve_rows(const ErrorCurve& c) {
    std::string out;
    for (const auto& p : c.points) {
        out += csv_field(c.label) + ',' + std::to_string(c.seed) + ',' + std::to_string(p.step) + ',' +
               format_double(p.mse) + ',' + (p.mse_rollout ? format_double(*p.mse_rollout) : "") + '\n';
    }
    return out;
}

}  // namespace

std::vector<std::string> comparison_report(const std::vector<ErrorCurve>& curves, const std::filesystem::path& dir,
                                           const nlohmann::json& config) {
    if (curves.empty()) throw InvalidInput("comparison_report: no curves");
    for (const auto& c : curves) c.validate();
    const std::string header = "label,seed,step,mse,mse_rollout\n";
    std::vector<std::string> files;

    std::string all = header;
    for (const auto& c : curves) all += curve_rows(c);
    write_text_file(dir / "curves.csv", all);
    files.push_back("curves.csv");

    for (const auto& c : curves) {
        const std::string name = "curve-" + file_stem(c.label) + "-s" + std::to_string(c.seed) + ".csv";
        write_text_file(dir / name, header + curve_rows(c));
        files.push_back(name);
    }

    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    for (const auto& [label, s] : summarize(curves)) {
        summary[label] = {{"mean_final_mse", s.mean_final_mse}, {"std_final_mse", s.std_final_mse}, {"seeds", s.seeds}};
    }
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    files.push_back("summary.json");

    nlohmann::ordered_json manifest;
    manifest["metric"] = "held-out one-step MSE on (delta s, r)";
    manifest["config"] = config;
    files.push_back("manifest.json");
    manifest["files"] = files;
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    return files;
}

d2p::D2PModelConfig sized(d2p::D2PModelConfig config, const ModelSizes& sizes) {
    config.latent_width = sizes.latent_width;
    config.kernel_hidden = sizes.kernel_hidden;
    config.decoder_hidden = sizes.decoder_hidden;
    config.kernel_kind = sizes.kernel_kind;
    return config;
}

std::vector<ModelEntry> matched_lineup(const sd2::Partition& partition, std::size_t state_width,
                                       const ModelSizes& sizes, const std::vector<std::string>& baselines,
                                       std::uint64_t seed) {
    const std::size_t m = partition.action_width();
    const std::size_t k = partition.size();
    std::vector<ModelEntry> out;
    out.push_back({"d2p", sized(d2p::D2PModelConfig::decomposed(partition, state_width), sizes)});
    const std::size_t target = out.front().config.parameter_count();
    for (const auto& name : baselines) {
        d2p::D2PModelConfig c;
        if (name == "monolithic") {
            c = sized(d2p::D2PModelConfig::monolithic(state_width, m), sizes);
        } else if (name == "kernel_ensemble") {
            c = sized(d2p::D2PModelConfig::ensemble(state_width, m, k), sizes);
        } else if (name == "random") {
            // Only one partition exists with 1 or m groups; otherwise insist on a different one.
            const bool unique = k == 1 || k == m;
            sd2::Partition p;
            for (std::uint64_t attempt = 0;; ++attempt) {
                p = sd2::random_partition(m, k, derive_seed(derive_seed(seed, "random_partition"), attempt));
                if (unique || !(p == partition)) break;
            }
            c = sized(d2p::D2PModelConfig::decomposed(p, state_width), sizes);
        } else {
            throw InvalidInput("unknown baseline '" + name + "' (monolithic, kernel_ensemble, random)");
        }
        out.push_back({name, d2p::match_parameter_count(c, target)});
    }
    return out;
}

ModelFactory learned_factory(d2p::D2PModelConfig config, d2p::TrainHyper hyper) {
    config.validate();
    return [config, hyper](std::uint64_t seed) -> std::unique_ptr<d2p::WorldModel> {
        d2p::TrainHyper h = hyper;
        h.seed = seed;
        return std::make_unique<d2p::LearnedModel>(d2p::D2PModel(config, seed), h);
    };
}

d2p::TrainHyper default_bench_hyper() {
    d2p::TrainHyper h;
    h.steps = 500;
    return h;
}

}  // namespace ed2::bench
