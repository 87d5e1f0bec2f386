#include "ed2/envs/dataset.hpp"

#include "ed2/common/errors.hpp"
#include "ed2/common/numfmt.hpp"
#include "ed2/common/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

namespace ed2::envs {

using ordered_json = nlohmann::ordered_json;

Policy uniform_random_policy(std::size_t action_width, std::uint64_t seed) {
    auto rng = std::make_shared<Rng>(seed);
    return [rng, action_width](std::span<const double>) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Action a(action_width);
        for (double& x : a) x = u(*rng);
        return a;
    };
}

Dataset collect_trajectories(const BlockEnvSpec& spec, const Policy& policy, std::size_t episodes,
                             std::uint64_t seed, std::string policy_name) {
    spec.validate();
    if (episodes == 0) throw InvalidInput("collect_trajectories: episodes must be >= 1");
    Dataset d;
    d.meta = {spec.name, spec.state_width(), spec.action_width(), seed, std::move(policy_name), spec.hash()};
    d.transitions.reserve(episodes * spec.horizon);
    for (std::size_t e = 0; e < episodes; ++e) {
        State s = env_reset(spec, derive_seed(seed, e));
        for (std::size_t t = 0; t < spec.horizon; ++t) {
            Action a = policy(s);
            if (a.size() != spec.action_width()) {
                throw InvalidInput("policy returned action of width " + std::to_string(a.size()) +
                                   ", expected " + std::to_string(spec.action_width()));
            }
            StepResult step = env_step(spec, s, a);
            d.transitions.push_back({s, a, step.reward, step.next_state, static_cast<std::int64_t>(e),
                                     static_cast<std::int64_t>(t)});
            s = std::move(step.next_state);
        }
    }
    return d;
}

Dataset collect_random(const BlockEnvSpec& spec, std::size_t episodes, std::uint64_t seed) {
    return collect_trajectories(spec, uniform_random_policy(spec.action_width(), derive_seed(seed, "policy")),
                                episodes, seed);
}

std::string dataset_to_jsonl(const Dataset& dataset) {
    std::ostringstream out;
    ordered_json meta;
    meta["env"] = dataset.meta.env;
    meta["n"] = dataset.meta.n;
    meta["m"] = dataset.meta.m;
    meta["seed"] = dataset.meta.seed;
    if (!dataset.meta.policy.empty()) meta["policy"] = dataset.meta.policy;
    if (!dataset.meta.spec_hash.empty()) meta["spec_hash"] = dataset.meta.spec_hash;
    out << meta.dump() << '\n';
    for (const auto& tr : dataset.transitions) {
        out << "{\"ep\":" << tr.episode_id << ",\"t\":" << tr.t << ",\"s\":" << format_double_array(tr.s)
            << ",\"a\":" << format_double_array(tr.a) << ",\"r\":" << format_double(tr.r)
            << ",\"s2\":" << format_double_array(tr.s_next) << "}\n";
    }
    return out.str();
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset " + path.string());
    out << dataset_to_jsonl(dataset);
    if (!out) throw std::runtime_error("failed writing dataset " + path.string());
}

namespace {

std::vector<double> read_vector(const nlohmann::json& j, const char* key, std::size_t width, std::size_t line) {
    if (!j.contains(key)) throw ParseError(line, std::string("missing field '") + key + "'");
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw ParseError(line, std::string("field '") + key + "' is not an array");
    if (arr.size() != width) {
        throw ParseError(line, std::string("field '") + key + "' has width " + std::to_string(arr.size()) +
                                   ", expected " + std::to_string(width));
    }
    std::vector<double> v;
    v.reserve(width);
    for (const auto& x : arr) {
        if (!x.is_number()) throw ParseError(line, std::string("field '") + key + "' holds a non-number");
        v.push_back(x.get<double>());
        if (!std::isfinite(v.back())) throw ParseError(line, std::string("field '") + key + "' is not finite");
    }
    return v;
}

}  // namespace

Dataset parse_dataset(std::istream& in) {
    Dataset d;
    std::string text;
    std::size_t line = 0;
    bool have_meta = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ParseError(line, "expected a JSON object");
        try {
            if (!have_meta) {
                d.meta.env = j.at("env").get<std::string>();
                d.meta.n = j.at("n").get<std::size_t>();
                d.meta.m = j.at("m").get<std::size_t>();
                d.meta.seed = j.at("seed").get<std::uint64_t>();
                d.meta.policy = j.value("policy", std::string());
                d.meta.spec_hash = j.value("spec_hash", std::string());
                if (d.meta.n == 0 || d.meta.m == 0) throw ParseError(line, "metadata widths must be positive");
                have_meta = true;
                continue;
            }
            Transition tr;
            tr.episode_id = j.at("ep").get<std::int64_t>();
            tr.t = j.at("t").get<std::int64_t>();
            tr.s = read_vector(j, "s", d.meta.n, line);
            tr.a = read_vector(j, "a", d.meta.m, line);
            if (!j.at("r").is_number()) throw ParseError(line, "field 'r' is not a number");
            tr.r = j.at("r").get<double>();
            if (!std::isfinite(tr.r)) throw ParseError(line, "field 'r' is not finite");
            tr.s_next = read_vector(j, "s2", d.meta.n, line);
            if (tr.t < 0 || tr.episode_id < 0) throw ParseError(line, "negative episode or time index");
            if (!d.transitions.empty()) {
                const auto& prev = d.transitions.back();
                if (std::pair(tr.episode_id, tr.t) <= std::pair(prev.episode_id, prev.t)) {
                    throw ParseError(line, "records are not in increasing (ep, t) order");
                }
            }
            d.transitions.push_back(std::move(tr));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line, std::string("bad record: ") + e.what());
        }
    }
    if (!have_meta) throw ParseError(line, "missing metadata line");
    return d;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot read dataset " + path.string());
    return parse_dataset(in);
}

void validate_dataset(const Dataset& dataset) {
    for (std::size_t k = 0; k < dataset.transitions.size(); ++k) {
        const auto& tr = dataset.transitions[k];
        if (tr.s.size() != dataset.meta.n || tr.s_next.size() != dataset.meta.n || tr.a.size() != dataset.meta.m) {
            throw InvalidInput("transition " + std::to_string(k) + " has inconsistent widths");
        }
        if (k > 0) {
            const auto& prev = dataset.transitions[k - 1];
            if (std::pair(tr.episode_id, tr.t) <= std::pair(prev.episode_id, prev.t)) {
                throw InvalidInput("transition " + std::to_string(k) + " breaks (episode, t) ordering");
            }
        }
    }
}

}  // namespace ed2::envs
