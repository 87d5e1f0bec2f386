#include "ed2/envs/block_env.hpp"

#include "ed2/common/errors.hpp"
#include "ed2/common/numfmt.hpp"
#include "ed2/common/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace ed2::envs {

namespace {

nn::Matrix random_orthonormal(std::size_t g, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double floor = 0.3 / std::sqrt(static_cast<double>(g));
    for (int attempt = 0; attempt < 10000; ++attempt) {
        Eigen::MatrixXd a(g, g);
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = normal(rng);
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g, g);
        if (g == 1 || q.cwiseAbs().minCoeff() >= floor) return q;
    }
    throw InvalidInput("could not draw a mixing matrix");
}

}  // namespace

std::size_t BlockEnvSpec::action_width() const {
    std::size_t m = 0;
    for (const auto& b : blocks) m += b.size();
    return m;
}

void BlockEnvSpec::validate() const {
    if (blocks.empty()) throw InvalidInput("env spec has no blocks");
    const std::size_t m = action_width();
    std::vector<int> seen(m, 0);
    for (const auto& b : blocks) {
        if (b.empty()) throw InvalidInput("env spec has an empty block");
        for (auto i : b) {
            if (i >= m) throw InvalidInput("env block index " + std::to_string(i + 1) + " out of range");
            if (seen[i]++) throw InvalidInput("env block index " + std::to_string(i + 1) + " repeated");
        }
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("env alpha must lie in (0, 1)");
    if (!(gamma >= 0.0)) throw InvalidInput("env gamma must be >= 0");
    if (!std::isfinite(beta)) throw InvalidInput("env beta must be finite");
    if (horizon == 0) throw InvalidInput("env horizon must be positive");
    if (mixing.size() != blocks.size()) throw InvalidInput("env needs one mixing matrix per block");
    for (std::size_t j = 0; j < blocks.size(); ++j) {
        const auto g = static_cast<Eigen::Index>(blocks[j].size());
        if (mixing[j].rows() != g || mixing[j].cols() != g) {
            throw InvalidInput("env mixing matrix " + std::to_string(j) + " has the wrong shape");
        }
    }
}

std::string BlockEnvSpec::hash() const {
    std::uint64_t h = hash_name(spec_to_json(*this).dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

BlockEnvSpec make_block_env(std::string name, std::vector<std::vector<std::size_t>> blocks, double alpha,
                            double beta, double gamma, std::size_t horizon, std::uint64_t seed) {
    BlockEnvSpec spec;
    spec.name = std::move(name);
    spec.blocks = std::move(blocks);
    spec.alpha = alpha;
    spec.beta = beta;
    spec.gamma = gamma;
    spec.horizon = horizon;
    spec.seed = seed;
    Rng rng = make_rng(seed, "mixing");
    for (const auto& b : spec.blocks) spec.mixing.push_back(random_orthonormal(b.size(), rng));
    spec.validate();
    return spec;
}

std::vector<std::string> preset_names() { return {"blocks-2x3", "blocks-3x2", "blocks-4x2-coupled"}; }

BlockEnvSpec preset(std::string_view name) {
    constexpr double alpha = 0.7;
    constexpr double beta = 0.3;
    constexpr std::size_t horizon = 20;
    if (name == "blocks-2x3") {
        return make_block_env("blocks-2x3", {{0, 1, 2}, {3, 4, 5}}, alpha, beta, 0.0, horizon, 1);
    }
    if (name == "blocks-3x2") {
        return make_block_env("blocks-3x2", {{0, 1}, {2, 3}, {4, 5}}, alpha, beta, 0.0, horizon, 2);
    }
    if (name == "blocks-4x2-coupled") {
        return make_block_env("blocks-4x2-coupled", {{0, 1}, {2, 3}, {4, 5}, {6, 7}}, alpha, beta, 0.05,
                              horizon, 42);
    }
    std::string list;
    for (const auto& n : preset_names()) list += (list.empty() ? "" : ", ") + n;
    throw InvalidInput("unknown env preset '" + std::string(name) + "' (available: " + list + ")");
}

nlohmann::json spec_to_json(const BlockEnvSpec& spec) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : spec.blocks) {
        nlohmann::json g = nlohmann::json::array();
        for (auto i : b) g.push_back(i + 1);
        blocks.push_back(g);
    }
    nlohmann::json mixing = nlohmann::json::array();
    for (const auto& mx : spec.mixing) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < mx.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < mx.cols(); ++c) row.push_back(mx(r, c));
            rows.push_back(row);
        }
        mixing.push_back(rows);
    }
    return {{"name", spec.name}, {"blocks", blocks},   {"alpha", spec.alpha},   {"beta", spec.beta},
            {"gamma", spec.gamma}, {"horizon", spec.horizon}, {"seed", spec.seed}, {"mixing", mixing}};
}

BlockEnvSpec spec_from_json(const nlohmann::json& j) {
    try {
        std::vector<std::vector<std::size_t>> blocks;
        for (const auto& g : j.at("blocks")) {
            std::vector<std::size_t> b;
            for (const auto& i : g) {
                const auto v = i.get<long long>();
                if (v < 1) throw InvalidInput("env block index " + std::to_string(v) + " out of range");
                b.push_back(static_cast<std::size_t>(v - 1));
            }
            blocks.push_back(std::move(b));
        }
        BlockEnvSpec spec = make_block_env(j.value("name", std::string("custom")), std::move(blocks),
                                           j.value("alpha", 0.7), j.value("beta", 0.3), j.value("gamma", 0.0),
                                           j.value("horizon", std::size_t{20}), j.value("seed", std::uint64_t{0}));
        if (j.contains("mixing")) {
            spec.mixing.clear();
            for (const auto& mx : j.at("mixing")) {
                const auto g = static_cast<Eigen::Index>(mx.size());
                nn::Matrix m(g, g);
                for (Eigen::Index r = 0; r < g; ++r) {
                    if (static_cast<Eigen::Index>(mx[r].size()) != g) throw InvalidInput("mixing matrix not square");
                    for (Eigen::Index c = 0; c < g; ++c) m(r, c) = mx[r][c].get<double>();
                }
                spec.mixing.push_back(std::move(m));
            }
            spec.validate();
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("env spec: ") + e.what());
    }
}

BlockEnvSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read env spec " + path.string());
    try {
        return spec_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(std::string("env spec: ") + e.what());
    }
}

State env_reset(const BlockEnvSpec& spec, std::uint64_t seed) {
    Rng rng = make_rng(seed, "reset");
    std::uniform_real_distribution<double> pos(-1.0, 1.0);
    State s(spec.state_width(), 0.0);
    for (std::size_t i = 0; i < spec.action_width(); ++i) s[2 * i] = pos(rng);
    return s;
}

StepResult env_step(const BlockEnvSpec& spec, std::span<const double> state, std::span<const double> action) {
    const std::size_t m = spec.action_width();
    if (state.size() != 2 * m) {
        throw InvalidInput("env_step: state width " + std::to_string(state.size()) + ", expected " +
                           std::to_string(2 * m));
    }
    if (action.size() != m) {
        throw InvalidInput("env_step: action width " + std::to_string(action.size()) + ", expected " +
                           std::to_string(m));
    }
    for (double x : state) {
        if (!std::isfinite(x)) throw InvalidInput("env_step: non-finite state");
    }
    for (double x : action) {
        if (!std::isfinite(x)) throw InvalidInput("env_step: non-finite action");
    }

    StepResult out;
    out.next_state.assign(state.begin(), state.end());
    double total_v = 0.0;
    for (std::size_t i = 0; i < m; ++i) total_v += state[2 * i + 1];

    for (std::size_t j = 0; j < spec.blocks.size(); ++j) {
        const auto& block = spec.blocks[j];
        const nn::Matrix& mix = spec.mixing[j];
        double coupling = 0.0;
        if (spec.gamma != 0.0 && block.size() < m) {
            double inside = 0.0;
            for (auto i : block) inside += state[2 * i + 1];
            coupling = spec.gamma * (total_v - inside) / static_cast<double>(m - block.size());
        }
        for (std::size_t r = 0; r < block.size(); ++r) {
            double drive = 0.0;
            for (std::size_t c = 0; c < block.size(); ++c) {
                drive += mix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) *
                         std::clamp(action[block[c]], -1.0, 1.0);
            }
            const std::size_t i = block[r];
            const double v = spec.alpha * state[2 * i + 1] + spec.beta * drive + coupling;
            out.next_state[2 * i + 1] = v;
            out.next_state[2 * i] = state[2 * i] + v;
        }
    }
    for (std::size_t i = 0; i < m; ++i) out.reward -= out.next_state[2 * i] * out.next_state[2 * i];
    return out;
}

}  // namespace ed2::envs
