#include "ed2/cli/cli.hpp"

#include "ed2/bench/bench.hpp"
#include "ed2/common/errors.hpp"
#include "ed2/common/io.hpp"
#include "ed2/common/numfmt.hpp"
#include "ed2/common/rng.hpp"
#include "ed2/control/mbrl.hpp"
#include "ed2/d2p/train.hpp"
#include "ed2/d2p/world_model.hpp"
#include "ed2/envs/dataset.hpp"
#include "ed2/sd2/cluster.hpp"
#include "ed2/sd2/features.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>

namespace ed2::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// ---- option resolution: flags > config file > defaults ----

struct OptionDef {
    std::string name;  // config key; the flag is --name with '_' spelled '-'

    json fallback;     // type of the default fixes the option's type; null means optional text
    std::string help;
};

struct Command {
    std::string name;
    std::string help;
    std::vector<OptionDef> options;
    std::function<void(const json& cfg, std::ostream& out)> run;
};

std::string flag(const std::string& name) {
    std::string f = "--" + name;
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
}

long long parse_integer(const std::string& text, const std::string& name) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw InvalidInput(flag(name) + ": expected an integer, got '" + text + "'");
    }
    return v;
}

double parse_real(const std::string& text, const std::string& name) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(v)) {
        throw InvalidInput(flag(name) + ": expected a number, got '" + text + "'");
    }
    return v;
}

json from_text(const OptionDef& def, const std::string& text) {
    const json& f = def.fallback;
    if (f.is_number_unsigned()) {
        const long long v = parse_integer(text, def.name);
        if (v < 0) throw InvalidInput(flag(def.name) + " must be >= 0");
        return static_cast<std::uint64_t>(v);
    }
    if (f.is_number_integer()) return parse_integer(text, def.name);
    if (f.is_number_float()) return parse_real(text, def.name);
    if (f.is_boolean()) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw InvalidInput(flag(def.name) + ": expected true or false");
    }
    if (f.is_array()) {
        json arr = json::array();
        std::size_t start = 0;
        while (start <= text.size()) {
            const std::size_t comma = text.find(',', start);
            const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            const long long v = parse_integer(item, def.name);
            if (v < 0) throw InvalidInput(flag(def.name) + ": values must be >= 0");
            arr.push_back(static_cast<std::uint64_t>(v));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return arr;
    }
    return text;
}

json from_config(const OptionDef& def, const json& value) {
    const json& f = def.fallback;
    const std::string where = "config key '" + def.name + "'";
    if (f.is_number_unsigned()) {
        if (value.is_number_unsigned()) return value;
        if (value.is_number_integer() && value.get<long long>() >= 0) return value.get<std::uint64_t>();
        throw InvalidInput(where + ": expected a nonnegative integer");
    }
    if (f.is_number_integer()) {
        if (value.is_number_integer()) return value;
        throw InvalidInput(where + ": expected an integer");
    }
    if (f.is_number_float()) {
        if (value.is_number()) return value.get<double>();
        throw InvalidInput(where + ": expected a number");
    }
    if (f.is_boolean()) {
        if (value.is_boolean()) return value;
        throw InvalidInput(where + ": expected true or false");
    }
    if (f.is_array()) {
        if (value.is_array()) {
            for (const auto& v : value) {
                if (!v.is_number_unsigned()) throw InvalidInput(where + ": expected a list of nonnegative integers");
            }
            return value;
        }
        throw InvalidInput(where + ": expected a list");
    }
    if (value.is_string() || (f.is_null() && value.is_null())) return value;
    throw InvalidInput(where + ": expected a string");
}

json load_config(const std::string& path, const std::string& command) {
    if (!fs::exists(path)) throw InvalidInput("--config: no such file '" + path + "'");
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw InvalidInput("--config: " + std::string(e.what()));
    }
    if (!doc.is_object()) throw InvalidInput("--config: expected a JSON object");
    if (doc.contains(command) && doc.at(command).is_object()) return doc.at(command);
    return doc;
}

// ---- shared helpers ----

std::size_t as_size(const json& cfg, const char* key) { return cfg.at(key).get<std::size_t>(); }
double as_real(const json& cfg, const char* key) { return cfg.at(key).get<double>(); }
std::string as_text(const json& cfg, const char* key) { return cfg.at(key).is_null() ? "" : cfg.at(key).get<std::string>(); }

fs::path out_dir(const json& cfg) {
    const std::string dir = as_text(cfg, "out");
    if (dir.empty()) throw InvalidInput("--out must not be empty");
    return dir;
}

void require_file(const std::string& path, const char* option) {
    if (path.empty()) throw InvalidInput(std::string("--") + option + " is required");
    if (!fs::is_regular_file(path)) throw InvalidInput(std::string("--") + option + ": no such file '" + path + "'");
}

envs::Dataset read_dataset(const std::string& path) {
    require_file(path, "data");
    return envs::load_dataset(path);
}

envs::BlockEnvSpec resolve_env(const json& cfg) {
    const std::string spec_path = as_text(cfg, "spec");
    if (!spec_path.empty()) {
        require_file(spec_path, "spec");
        return envs::load_spec(spec_path);
    }
    return envs::preset(as_text(cfg, "env"));
}

void write_manifest(const fs::path& dir, const std::string& command, const json& cfg, const std::vector<std::string>& files,
                    json extra = json::object()) {
    json m;
    m["command"] = command;
    m["config"] = cfg;
    for (auto& [k, v] : extra.items()) m[k] = v;
    std::vector<std::string> all = files;
    all.push_back("manifest.json");
    m["files"] = all;
    write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

d2p::TrainHyper hyper_from(const json& cfg) {
    d2p::TrainHyper h;
    h.batch = as_size(cfg, "batch");
    h.lr = as_real(cfg, "lr");
    h.lr_end_fraction = as_real(cfg, "lr_end");
    h.seq_len = as_size(cfg, "seq_len");
    if (cfg.contains("steps")) h.steps = as_size(cfg, "steps");
    return h;
}

std::vector<OptionDef> model_options() {
    return {{"kernel", "nonrecurrent", "kernel kind: nonrecurrent or recurrent"},
            {"latent", std::uint64_t{64}, "latent width H"},
            {"kernel_hidden", std::uint64_t{64}, "hidden width of each kernel"},
            {"decoder_hidden", std::uint64_t{64}, "hidden width of the decoder"},
            {"batch", std::uint64_t{64}, "batch size"},
            {"lr", 3e-3, "Adam learning rate"},
            {"lr_end", 0.05, "learning rate at the end of each training call, as a fraction of lr"},
            {"seq_len", std::uint64_t{16}, "sequence length for recurrent kernels"}};
}

bench::ModelSizes sizes_from(const json& cfg) {
    bench::ModelSizes s;
    s.kernel_kind = d2p::kernel_kind_from_string(as_text(cfg, "kernel"));
    s.latent_width = as_size(cfg, "latent");
    s.kernel_hidden = as_size(cfg, "kernel_hidden");
    s.decoder_hidden = as_size(cfg, "decoder_hidden");
    return s;
}

std::vector<std::uint64_t> seeds_from(const json& cfg) {
    auto seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
    if (seeds.empty()) throw InvalidInput("--seeds: at least one seed is required");
    return seeds;
}

// ---- commands ----

void cmd_gen_data(const json& cfg, std::ostream& out) {
    const envs::BlockEnvSpec spec = resolve_env(cfg);
    const std::size_t episodes = as_size(cfg, "episodes");
    if (episodes == 0) throw InvalidInput("--episodes must be >= 1");
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    const envs::Dataset d = envs::collect_random(spec, episodes, derive_seed(seed, "data"));
    const fs::path dir = out_dir(cfg);
    write_text_file(dir / "dataset.jsonl", envs::dataset_to_jsonl(d));
    json extra;
    extra["env"] = envs::spec_to_json(spec);
    extra["transitions"] = d.size();
    write_manifest(dir, "gen-data", cfg, {"dataset.jsonl"}, extra);
    out << "wrote " << (dir / "dataset.jsonl").string() << " (" << d.size() << " transitions)\n";
}

void cmd_cluster(const json& cfg, std::ostream& out) {
    const envs::Dataset d = read_dataset(as_text(cfg, "data"));
    const std::string method = as_text(cfg, "method");
    const double eta = as_real(cfg, "eta");
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    const std::size_t m = d.meta.m;
    sd2::Partition partition;
    std::vector<sd2::MergeStep> trace;
    if (method == "cl") {
        sd2::ClusterResult r = sd2::sd2_cluster(sd2::pearson_features(d), eta);
        partition = r.partition;
        trace = r.trace;
    } else if (method == "cd") {
        partition = sd2::complete_decomposition(m);
    } else if (method.rfind("prior:", 0) == 0) {
        const std::string path = method.substr(6);
        require_file(path, "method prior:");
        partition = sd2::load_prior_partition(path, m);
    } else if (method.rfind("random:", 0) == 0) {
        const long long k = parse_integer(method.substr(7), "method random:");
        if (k < 1) throw InvalidInput("--method random:<k> needs k >= 1");
        partition = sd2::random_partition(m, static_cast<std::size_t>(k), derive_seed(seed, "random_partition"));
    } else {
        throw InvalidInput("unknown --method '" + method + "' (cl, cd, prior:<path>, random:<k>)");
    }
    const fs::path dir = out_dir(cfg);
    write_text_file(dir / "partition.json", partition.to_json().dump() + "\n");
    std::string log = "step,first,second,rela,merged\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& s = trace[i];
        log += std::to_string(i + 1) + ',' + csv_field(sd2::group_to_string(s.first)) + ',' +
               csv_field(sd2::group_to_string(s.second)) + ',' + format_double(s.rela) + ',' +
               (s.merged ? "true" : "false") + '\n';
    }
    write_text_file(dir / "merge_log.csv", log);
    json extra;
    extra["partition"] = partition.to_string();
    std::size_t merges = 0;
    for (const auto& s : trace) merges += s.merged ? 1 : 0;
    extra["merges"] = merges;
    write_manifest(dir, "cluster", cfg, {"partition.json", "merge_log.csv"}, extra);
    out << "partition " << partition.to_string() << " (" << merges << " merges)\n";
}

void cmd_train(const json& cfg, std::ostream& out) {
    const envs::Dataset d = read_dataset(as_text(cfg, "data"));
    const auto variant = d2p::variant_from_string(as_text(cfg, "variant"));
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    d2p::D2PModelConfig mc;
    std::string partition_text;
    if (variant == d2p::ModelVariant::decomposed) {
        const std::string path = as_text(cfg, "partition");
        require_file(path, "partition");
        const sd2::Partition p = sd2::load_prior_partition(path, d.meta.m);
        mc = d2p::D2PModelConfig::decomposed(p, d.meta.n);
        partition_text = p.to_string();
    } else if (variant == d2p::ModelVariant::monolithic) {
        mc = d2p::D2PModelConfig::monolithic(d.meta.n, d.meta.m);
    } else {
        mc = d2p::D2PModelConfig::ensemble(d.meta.n, d.meta.m, as_size(cfg, "ensemble_size"));
    }
    mc = bench::sized(mc, sizes_from(cfg));
    mc.activation = nn::activation_from_string(as_text(cfg, "activation"));
    if (cfg.at("match_parameters").get<std::size_t>() > 0) {
        mc = d2p::match_parameter_count(mc, as_size(cfg, "match_parameters"));
    }
    d2p::TrainHyper h = hyper_from(cfg);
    h.seed = seed;
    d2p::TrainResult r = d2p::train_model(d2p::D2PModel(mc, seed), d, h);

    const fs::path dir = out_dir(cfg);
    write_text_file(dir / "checkpoint.json", r.model.checkpoint().dump() + "\n");
    std::string loss = "step,loss\n";
    for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
        loss += std::to_string(i + 1) + ',' + format_double(r.loss_trace[i]) + '\n';
    }
    write_text_file(dir / "loss.csv", loss);
    json extra;
    extra["model"] = d2p::config_to_json(mc);
    extra["parameter_count"] = r.model.parameter_count();
    if (!partition_text.empty()) extra["partition"] = partition_text;
    if (!r.loss_trace.empty()) extra["final_loss"] = r.loss_trace.back();
    write_manifest(dir, "train", cfg, {"checkpoint.json", "loss.csv"}, extra);
    out << "trained " << mc.label() << " (" << r.model.parameter_count() << " parameters)";
    if (!r.loss_trace.empty()) out << ", final loss " << format_double(r.loss_trace.back());
    out << "\n";
}

void cmd_bench(const json& cfg, std::ostream& out) {
    const auto seeds = seeds_from(cfg);
    const std::string data_path = as_text(cfg, "data");
    std::optional<envs::Dataset> shared;
    std::optional<envs::BlockEnvSpec> spec;
    if (!data_path.empty()) {
        shared = read_dataset(data_path);
    } else {
        spec = resolve_env(cfg);
    }
    std::optional<sd2::Partition> fixed;
    const std::string partition_path = as_text(cfg, "partition");

    std::vector<std::string> wanted;
    {
        const std::string list = as_text(cfg, "models");
        std::size_t start = 0;
        while (start <= list.size()) {
            const std::size_t comma = list.find(',', start);
            wanted.push_back(list.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    std::vector<std::string> baselines;
    for (const auto& w : wanted) {
        if (w == "d2p") continue;
        if (w != "monolithic" && w != "kernel_ensemble" && w != "random") {
            throw InvalidInput("--models: unknown model '" + w + "' (d2p, monolithic, kernel_ensemble, random)");
        }
        baselines.push_back(w);
    }

    bench::ExpandingSchedule schedule = bench::ExpandingSchedule::equal(as_size(cfg, "stages"), as_size(cfg, "steps_per_stage"));
    bench::ProtocolOptions opts;
    opts.eval_split = as_real(cfg, "eval_split");
    opts.min_train = as_size(cfg, "batch");
    opts.rollout_horizon = as_size(cfg, "rollout_horizon");
    const d2p::TrainHyper hyper = hyper_from(cfg);
    const bench::ModelSizes sizes = sizes_from(cfg);

    std::vector<bench::ErrorCurve> curves;
    json runs = json::array();
    for (auto seed : seeds) {
        envs::Dataset data = shared ? *shared : envs::collect_random(*spec, as_size(cfg, "episodes"), derive_seed(seed, "data"));
        sd2::Partition partition;
        if (!partition_path.empty()) {
            require_file(partition_path, "partition");
            partition = sd2::load_prior_partition(partition_path, data.meta.m);
        } else {
            partition = sd2::sd2_cluster(sd2::pearson_features(data), as_real(cfg, "eta")).partition;
        }
        const auto lineup = bench::matched_lineup(partition, data.meta.n, sizes, baselines, seed);
        json run;
        run["seed"] = seed;
        run["partition"] = partition.to_string();
        json models = json::object();
        for (const auto& entry : lineup) {
            if (std::find(wanted.begin(), wanted.end(), entry.label) == wanted.end()) continue;
            curves.push_back(bench::expanding_error_protocol(bench::learned_factory(entry.config, hyper), data, schedule,
                                                             seed, entry.label, opts));
            models[entry.label] = {{"model", entry.config.label()}, {"parameter_count", entry.config.parameter_count()}};
            out << "seed " << seed << " " << entry.label << " final mse " << format_double(curves.back().final_mse()) << "\n";
        }
        run["models"] = models;
        runs.push_back(run);
    }
    json report_cfg;
    report_cfg["command"] = "bench";
    report_cfg["options"] = cfg;
    report_cfg["runs"] = runs;
    bench::comparison_report(curves, out_dir(cfg), nlohmann::json::parse(report_cfg.dump()));
}

void cmd_mbrl(const json& cfg, std::ostream& out) {
    const envs::BlockEnvSpec spec = resolve_env(cfg);
    const auto seeds = seeds_from(cfg);
    control::MbrlLoopConfig lc;
    lc.outer_iterations = as_size(cfg, "iterations");
    lc.initial_episodes = as_size(cfg, "initial_episodes");
    lc.episodes_per_iteration = as_size(cfg, "episodes_per_iteration");
    lc.train_steps = as_size(cfg, "train_steps");
    lc.partition = control::PartitionSource::parse(as_text(cfg, "partition"));
    lc.eta = as_real(cfg, "eta");
    const bench::ModelSizes sizes = sizes_from(cfg);
    lc.kernel_kind = sizes.kernel_kind;
    lc.latent_width = sizes.latent_width;
    lc.kernel_hidden = sizes.kernel_hidden;
    lc.decoder_hidden = sizes.decoder_hidden;
    lc.match_parameters = as_size(cfg, "match_parameters");
    lc.hyper = hyper_from(cfg);
    lc.planner.mode = control::planner_mode_from_string(as_text(cfg, "mode"));
    lc.planner.horizon = as_size(cfg, "horizon");
    lc.planner.population = as_size(cfg, "population");
    lc.planner.elites = as_size(cfg, "elites");
    lc.planner.iterations = as_size(cfg, "planner_iterations");
    lc.validate();

    const fs::path dir = out_dir(cfg);
    std::vector<std::string> files;
    json runs = json::array();
    std::vector<std::vector<double>> per_iteration(lc.outer_iterations);
    for (auto seed : seeds) {
        control::MbrlResult r = control::run_mbrl(spec, lc, seed);
        const std::string curve = "learning_curve-s" + std::to_string(seed) + ".csv";
        write_text_file(dir / curve, control::learning_curve_csv(r));
        files.push_back(curve);
        json run;
        run["seed"] = seed;
        run["partition"] = r.partition.to_string();
        run["model"] = d2p::config_to_json(r.model_config);
        run["parameter_count"] = r.model_config.parameter_count();
        run["final_return"] = r.final_return();
        std::size_t fallbacks = 0;
        for (const auto& it : r.curve) fallbacks += it.planner_fallbacks;
        run["planner_fallbacks"] = fallbacks;
        if (r.model) {
            const std::string ck = "model-s" + std::to_string(seed) + ".json";
            write_text_file(dir / ck, r.model->checkpoint().dump() + "\n");
            files.push_back(ck);
        }
        runs.push_back(run);
        for (std::size_t i = 0; i < r.curve.size(); ++i) per_iteration[i].push_back(r.curve[i].mean_return);
        out << "seed " << seed << " partition " << r.partition.to_string() << " final return "
            << format_double(r.final_return()) << "\n";
    }
    std::string agg = "iteration,mean_return,std_return\n";
    for (std::size_t i = 0; i < per_iteration.size(); ++i) {
        const auto& v = per_iteration[i];
        double mean = 0.0, var = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        for (double x : v) var += (x - mean) * (x - mean);
        agg += std::to_string(i) + ',' + format_double(mean) + ',' + format_double(std::sqrt(var / static_cast<double>(v.size()))) + '\n';
    }
    write_text_file(dir / "learning_curve.csv", agg);
    files.insert(files.begin(), "learning_curve.csv");

    json extra;
    extra["env"] = envs::spec_to_json(spec);
    extra["runs"] = runs;
    const std::size_t ref = as_size(cfg, "reference_episodes");
    if (ref > 0) {
        d2p::OracleModel oracle(spec);
        const auto o = control::mpc_returns(spec, oracle, lc.planner, ref, seeds.front());
        const auto rnd = control::random_returns(spec, ref, seeds.front());
        double om = 0.0, rm = 0.0;
        for (double x : o) om += x;
        for (double x : rnd) rm += x;
        extra["oracle_mpc_return"] = om / static_cast<double>(ref);
        extra["random_return"] = rm / static_cast<double>(ref);
        out << "oracle MPC return " << format_double(om / static_cast<double>(ref)) << ", random return "
            << format_double(rm / static_cast<double>(ref)) << "\n";
    }
    write_manifest(dir, "mbrl", cfg, files, extra);
}

void cmd_report(const json& cfg, std::ostream& out) {
    const std::string list = as_text(cfg, "runs");
    if (list.empty()) throw InvalidInput("--runs is required");
    std::vector<std::string> dirs;
    std::size_t start = 0;
    while (start <= list.size()) {
        const std::size_t comma = list.find(',', start);
        dirs.push_back(list.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    std::string csv = "run,command,label,metric,mean,std,count,rank\n";
    json report = json::array();
    for (const auto& d : dirs) {
        const fs::path manifest_path = fs::path(d) / "manifest.json";
        if (!fs::is_regular_file(manifest_path)) throw InvalidInput("--runs: no manifest.json in '" + d + "'");
        json manifest;
        try {
            manifest = json::parse(read_text_file(manifest_path));
        } catch (const json::parse_error& e) {
            throw ParseError(0, manifest_path.string() + ": " + e.what());
        }
        const std::string command = manifest.value("command", "");
        struct Row {
            std::string label, metric;
            double mean, std;
            std::size_t count;
        };
        std::vector<Row> rows;
        bool lower_is_better = true;
        if (command.empty() && manifest.contains("config") && manifest["config"].value("command", "") == "bench") {
            const json summary = json::parse(read_text_file(fs::path(d) / "summary.json"));
            for (auto& [label, s] : summary.items()) {
                rows.push_back({label, "final_mse", s.at("mean_final_mse").get<double>(), s.at("std_final_mse").get<double>(),
                                s.at("seeds").get<std::size_t>()});
            }
        } else if (command == "mbrl") {
            std::vector<double> finals;
            for (const auto& run : manifest.at("runs")) finals.push_back(run.at("final_return").get<double>());
            double mean = 0.0, var = 0.0;
            for (double x : finals) mean += x;
            mean /= static_cast<double>(finals.size());
            for (double x : finals) var += (x - mean) * (x - mean);
            const double sd = finals.size() > 1 ? std::sqrt(var / static_cast<double>(finals.size() - 1)) : 0.0;
            rows.push_back({manifest.at("config").at("partition").get<std::string>(), "final_return", mean, sd, finals.size()});
            if (manifest.contains("oracle_mpc_return")) {
                rows.push_back({"oracle_mpc", "return", manifest["oracle_mpc_return"].get<double>(), 0.0, 1});
                rows.push_back({"random_policy", "return", manifest["random_return"].get<double>(), 0.0, 1});
            }
            lower_is_better = false;
        } else {
            throw InvalidInput("--runs: '" + d + "' is not a bench or mbrl run directory");
        }
        // Rank 1 is the best entry of the run.
        std::vector<std::size_t> order(rows.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return lower_is_better ? rows[a].mean < rows[b].mean : rows[a].mean > rows[b].mean;
        });
        std::vector<std::size_t> rank(rows.size());
        for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i + 1;
        const std::string cmd = command.empty() ? "bench" : command;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            csv += csv_field(d) + ',' + cmd + ',' + csv_field(r.label) + ',' + r.metric + ',' + format_double(r.mean) + ',' +
                   format_double(r.std) + ',' + std::to_string(r.count) + ',' + std::to_string(rank[i]) + '\n';
            report.push_back({{"run", d}, {"command", cmd}, {"label", r.label}, {"metric", r.metric}, {"mean", r.mean},
                              {"std", r.std}, {"count", r.count}, {"rank", rank[i]}});
            out << d << " " << r.label << " " << r.metric << " " << format_double(r.mean) << " (rank " << rank[i] << ")\n";
        }
    }
    const fs::path dir = out_dir(cfg);
    write_text_file(dir / "report.csv", csv);
    write_text_file(dir / "report.json", report.dump(2) + "\n");
    write_manifest(dir, "report", cfg, {"report.csv", "report.json"});
}

std::vector<Command> commands() {
    std::vector<Command> cmds;
    cmds.push_back({"gen-data",
                    "collect random-policy episodes into a JSONL dataset",
                    {{"env", "blocks-2x3", "environment preset"},
                     {"spec", nullptr, "environment spec JSON file (overrides --env)"},
                     {"episodes", std::uint64_t{5}, "number of episodes"},
                     {"seed", std::uint64_t{0}, "root seed"},
                     {"out", "out/gen-data", "output directory"}},
                    cmd_gen_data});
    cmds.push_back({"cluster",
                    "discover an action partition from a dataset",
                    {{"data", nullptr, "dataset JSONL file"},
                     {"method", "cl", "cl, cd, prior:<path> or random:<k>"},
                     {"eta", sd2::kDefaultEta, "merge threshold for cl"},
                     {"seed", std::uint64_t{0}, "root seed (random:<k>)"},
                     {"out", "out/cluster", "output directory"}},
                    cmd_cluster});
    std::vector<OptionDef> train = {{"data", nullptr, "dataset JSONL file"},
                                    {"partition", nullptr, "partition JSON file (decomposed variant)"},
                                    {"variant", "decomposed", "decomposed, monolithic or kernel_ensemble"},
                                    {"ensemble_size", std::uint64_t{2}, "kernels of a kernel_ensemble"},
                                    {"activation", "tanh", "hidden activation: tanh, relu or identity"},
                                    {"match_parameters", std::uint64_t{0}, "re-choose kernel_hidden to this parameter count"},
                                    {"steps", std::uint64_t{1000}, "training steps"},
                                    {"seed", std::uint64_t{0}, "root seed"},
                                    {"out", "out/train", "output directory"}};
    for (auto& o : model_options()) train.push_back(o);
    cmds.push_back({"train", "train a world model on a dataset", train, cmd_train});
    std::vector<OptionDef> bench_opts = {{"data", nullptr, "dataset JSONL file shared by all seeds"},
                                         {"env", "blocks-2x3", "preset used to generate one dataset per seed"},
                                         {"spec", nullptr, "environment spec JSON file (overrides --env)"},
                                         {"episodes", std::uint64_t{40}, "episodes per generated dataset"},
                                         {"partition", nullptr, "partition JSON file for d2p (default: cluster each dataset)"},
                                         {"eta", sd2::kDefaultEta, "merge threshold when clustering"},
                                         {"models", "d2p,monolithic,kernel_ensemble,random", "comma-separated model list"},
                                         {"seeds", json::array({0, 1, 2, 3, 4}), "comma-separated seeds"},
                                         {"stages", std::uint64_t{10}, "expanding-dataset stages"},
                                         {"steps_per_stage", std::uint64_t{500}, "training steps per stage"},
                                         {"eval_split", 0.2, "held-out fraction of each prefix"},
                                         {"rollout_horizon", std::uint64_t{0}, "also record H-step rollout MSE when > 0"},
                                         {"out", "out/bench", "output directory"}};
    for (auto& o : model_options()) bench_opts.push_back(o);
    cmds.push_back({"bench", "expanding-dataset model-error comparison", bench_opts, cmd_bench});
    std::vector<OptionDef> mbrl = {{"env", "blocks-2x3", "environment preset"},
                                   {"spec", nullptr, "environment spec JSON file (overrides --env)"},
                                   {"seeds", json::array({0}), "comma-separated seeds"},
                                   {"iterations", std::uint64_t{10}, "outer iterations (iteration 0 is random data)"},
                                   {"initial_episodes", std::uint64_t{5}, "random-policy episodes in iteration 0"},
                                   {"episodes_per_iteration", std::uint64_t{2}, "MPC episodes per later iteration"},
                                   {"train_steps", std::uint64_t{1000}, "model training steps per iteration"},
                                   {"partition", "clustered", "clustered, complete, prior:<path>, random:<k> or monolithic"},
                                   {"eta", sd2::kDefaultEta, "merge threshold when clustering"},
                                   {"match_parameters", std::uint64_t{0}, "re-choose kernel_hidden to this parameter count"},
                                   {"mode", "cem", "planner: cem or random_shooting"},
                                   {"horizon", std::uint64_t{8}, "planning horizon"},
                                   {"population", std::uint64_t{300}, "candidate sequences per planner iteration"},
                                   {"elites", std::uint64_t{30}, "CEM elites"},
                                   {"planner_iterations", std::uint64_t{3}, "CEM iterations"},
                                   {"reference_episodes", std::uint64_t{0}, "oracle-MPC and random reference episodes"},
                                   {"out", "out/mbrl", "output directory"}};
    for (auto& o : model_options()) mbrl.push_back(o);
    cmds.push_back({"mbrl", "model-based RL loop with MPC on the learned model", mbrl, cmd_mbrl});
    cmds.push_back({"report",
                    "consolidate bench and mbrl run directories into ranking tables",
                    {{"runs", nullptr, "comma-separated run directories"}, {"out", "out/report", "output directory"}},
                    cmd_report});
    return cmds;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const std::vector<Command> cmds = commands();
    CLI::App app{"Environment dynamics decomposition toolkit"};
    app.require_subcommand(1);
    std::map<std::string, std::map<std::string, std::string>> raw;
    std::map<std::string, std::string> config_path;
    std::map<std::string, CLI::App*> subs;
    for (const auto& c : cmds) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        subs[c.name] = sub;
        sub->add_option("--config", config_path[c.name], "JSON config file; flags take precedence");
        for (const auto& o : c.options) {
            std::string help = o.help;
            if (o.fallback.is_string()) {
                help += " [default: " + o.fallback.get<std::string>() + "]";
            } else if (o.fallback.is_array()) {
                std::string list;
                for (const auto& v : o.fallback) list += (list.empty() ? "" : ",") + v.dump();
                help += " [default: " + list + "]";
            } else if (!o.fallback.is_null()) {
                help += " [default: " + o.fallback.dump() + "]";
            }
            CLI::Option* opt = sub->add_option(flag(o.name), raw[c.name][o.name], help);
            if (o.fallback.is_number_integer()) opt->type_name("INT");
            else if (o.fallback.is_number_float()) opt->type_name("FLOAT");
            else if (o.fallback.is_array()) opt->type_name("LIST");
        }
    }

    std::vector<const char*> argv{"ed2"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        const auto parsed = app.get_subcommands();
        out << (parsed.empty() ? app.help() : parsed.front()->help());
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const auto parsed = app.get_subcommands();
        err << (parsed.empty() ? app.help() : parsed.front()->help());
        return usage_error;
    }

    const Command* chosen = nullptr;
    for (const auto& c : cmds) {
        if (subs[c.name]->parsed()) chosen = &c;
    }
    if (chosen == nullptr) {
        err << app.help();
        return usage_error;
    }
    try {
        json cfg = json::object();
        for (const auto& o : chosen->options) cfg[o.name] = o.fallback;
        if (!config_path[chosen->name].empty()) {
            const json file = load_config(config_path[chosen->name], chosen->name);
            for (auto& [key, value] : file.items()) {
                auto it = std::find_if(chosen->options.begin(), chosen->options.end(),
                                       [&](const OptionDef& o) { return o.name == key; });
                if (it == chosen->options.end()) {
                    throw InvalidInput("config key '" + key + "' is not an option of " + chosen->name);
                }
                cfg[key] = from_config(*it, value);
            }
        }
        CLI::App* sub = subs[chosen->name];
        for (const auto& o : chosen->options) {
            if (sub->count(flag(o.name)) > 0) cfg[o.name] = from_text(o, raw[chosen->name][o.name]);
        }
        chosen->run(cfg, out);
        return ok;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return usage_error;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return usage_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return runtime_failure;
    }
}

}  // namespace ed2::cli
