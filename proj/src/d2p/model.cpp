#include "ed2/d2p/model.hpp"

#include "ed2/common/errors.hpp"
#include "ed2/common/rng.hpp"
#include "ed2/nn/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ed2::d2p {

using nn::Matrix;
using nn::Tape;
using nn::Var;

std::string to_string(KernelKind k) { return k == KernelKind::recurrent ? "recurrent" : "nonrecurrent"; }

std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::decomposed: return "decomposed";
        case ModelVariant::kernel_ensemble: return "kernel_ensemble";
        case ModelVariant::monolithic: return "monolithic";
    }
    return "decomposed";
}

KernelKind kernel_kind_from_string(const std::string& s) {
    if (s == "nonrecurrent") return KernelKind::nonrecurrent;
    if (s == "recurrent") return KernelKind::recurrent;
    throw InvalidInput("unknown kernel kind '" + s + "' (nonrecurrent, recurrent)");
}

ModelVariant variant_from_string(const std::string& s) {
    if (s == "decomposed") return ModelVariant::decomposed;
    if (s == "kernel_ensemble") return ModelVariant::kernel_ensemble;
    if (s == "monolithic") return ModelVariant::monolithic;
    throw InvalidInput("unknown model variant '" + s + "' (decomposed, kernel_ensemble, monolithic)");
}

D2PModelConfig D2PModelConfig::decomposed(const sd2::Partition& partition, std::size_t state_width) {
    D2PModelConfig c;
    c.variant = ModelVariant::decomposed;
    c.groups = partition.groups();
    c.state_width = state_width;
    c.action_width = partition.action_width();
    return c;
}

D2PModelConfig D2PModelConfig::monolithic(std::size_t state_width, std::size_t action_width) {
    D2PModelConfig c;
    c.variant = ModelVariant::monolithic;
    c.state_width = state_width;
    c.action_width = action_width;
    return c;
}

D2PModelConfig D2PModelConfig::ensemble(std::size_t state_width, std::size_t action_width, std::size_t kernels) {
    D2PModelConfig c;
    c.variant = ModelVariant::kernel_ensemble;
    c.state_width = state_width;
    c.action_width = action_width;
    c.ensemble_size = kernels;
    return c;
}

void D2PModelConfig::validate() const {
    if (state_width == 0 || action_width == 0) throw InvalidInput("model config: state/action widths must be >= 1");
    if (latent_width == 0 || kernel_hidden == 0 || decoder_hidden == 0) {
        throw InvalidInput("model config: latent, kernel and decoder widths must be >= 1");
    }
    if (variant == ModelVariant::decomposed) {
        // Throws PartitionError for anything that is not a disjoint cover.
        sd2::Partition::from_groups(groups, action_width);
    }
    if (variant == ModelVariant::kernel_ensemble && ensemble_size == 0) {
        throw InvalidInput("model config: ensemble needs at least one kernel");
    }
}

std::size_t D2PModelConfig::kernel_count() const {
    switch (variant) {
        case ModelVariant::decomposed: return groups.size();
        case ModelVariant::kernel_ensemble: return ensemble_size;
        case ModelVariant::monolithic: return 1;
    }
    return 1;
}

std::vector<std::size_t> D2PModelConfig::kernel_inputs(std::size_t k) const {
    if (variant == ModelVariant::decomposed) {
        auto g = groups.at(k);
        std::sort(g.begin(), g.end());
        return g;
    }
    std::vector<std::size_t> all(action_width);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
}

namespace {

nn::MlpSpec kernel_mlp_spec(const D2PModelConfig& c, std::size_t action_inputs) {
    return {{c.state_width + action_inputs, c.kernel_hidden, c.latent_width}, c.activation};
}

nn::MlpSpec kernel_embed_spec(const D2PModelConfig& c, std::size_t action_inputs) {
    // Single affine layer; the tanh is applied by the caller.
    return {{c.state_width + action_inputs, c.kernel_hidden}, c.activation};
}

nn::GruSpec kernel_gru_spec(const D2PModelConfig& c) { return {c.kernel_hidden, c.latent_width}; }

nn::MlpSpec decoder_spec(const D2PModelConfig& c) {
    return {{c.latent_width, c.decoder_hidden, c.state_width}, c.activation};
}

nn::MlpSpec reward_spec(const D2PModelConfig& c) { return {{c.latent_width, 1}, c.activation}; }

Var apply_activation(Tape& tape, nn::Activation act, Var x) {
    switch (act) {
        case nn::Activation::tanh: return tape.tanh(x);
        case nn::Activation::relu: return tape.relu(x);
        case nn::Activation::identity: return x;
    }
    return x;
}

}  // namespace

std::size_t D2PModelConfig::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < kernel_count(); ++k) {
        const std::size_t inputs = kernel_inputs(k).size();
        if (kernel_kind == KernelKind::nonrecurrent) {
            n += kernel_mlp_spec(*this, inputs).param_count();
        } else {
            n += kernel_embed_spec(*this, inputs).param_count() + kernel_gru_spec(*this).param_count();
        }
    }
    return n + decoder_spec(*this).param_count() + reward_spec(*this).param_count();
}

std::string D2PModelConfig::label() const {
    std::string s = to_string(variant);
    if (variant == ModelVariant::decomposed) {
        std::vector<sd2::Group> sorted = groups;
        for (auto& g : sorted) std::sort(g.begin(), g.end());
        std::sort(sorted.begin(), sorted.end());
        s += ":";
        for (std::size_t k = 0; k < sorted.size(); ++k) s += (k ? "," : "") + sd2::group_to_string(sorted[k]);
    } else if (variant == ModelVariant::kernel_ensemble) {
        s += ":k=" + std::to_string(ensemble_size);
    }
    return s;
}

nlohmann::json config_to_json(const D2PModelConfig& c) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : c.groups) {
        nlohmann::json row = nlohmann::json::array();
        for (auto i : g) row.push_back(i + 1);
        groups.push_back(row);
    }
    return {{"variant", to_string(c.variant)},
            {"kernel_kind", to_string(c.kernel_kind)},
            {"partition", groups},
            {"state_width", c.state_width},
            {"action_width", c.action_width},
            {"ensemble_size", c.ensemble_size},
            {"latent_width", c.latent_width},
            {"kernel_hidden", c.kernel_hidden},
            {"decoder_hidden", c.decoder_hidden},
            {"activation", nn::to_string(c.activation)},
            {"predict_delta", c.predict_delta}};
}

D2PModelConfig config_from_json(const nlohmann::json& j) {
    try {
        D2PModelConfig c;
        c.variant = variant_from_string(j.at("variant").get<std::string>());
        c.kernel_kind = kernel_kind_from_string(j.at("kernel_kind").get<std::string>());
        c.groups.clear();
        for (const auto& g : j.at("partition")) {
            sd2::Group grp;
            for (const auto& i : g) {
                const auto v = i.get<long long>();
                if (v < 1) throw InvalidInput("model config: partition index must be >= 1");
                grp.push_back(static_cast<std::size_t>(v - 1));
            }
            c.groups.push_back(std::move(grp));
        }
        c.state_width = j.at("state_width").get<std::size_t>();
        c.action_width = j.at("action_width").get<std::size_t>();
        c.ensemble_size = j.at("ensemble_size").get<std::size_t>();
        c.latent_width = j.at("latent_width").get<std::size_t>();
        c.kernel_hidden = j.at("kernel_hidden").get<std::size_t>();
        c.decoder_hidden = j.at("decoder_hidden").get<std::size_t>();
        c.activation = nn::activation_from_string(j.at("activation").get<std::string>());
        c.predict_delta = j.at("predict_delta").get<bool>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("model config: ") + e.what());
    }
}

void Normalizer::validate(std::size_t state_width) const {
    if (identity()) {
        if (!state_scale.empty() || !target_mean.empty() || !target_scale.empty()) {
            throw InvalidInput("normalizer: state_mean is empty but other fields are not");
        }
        return;
    }
    if (state_mean.size() != state_width || state_scale.size() != state_width ||
        target_mean.size() != state_width + 1 || target_scale.size() != state_width + 1) {
        throw InvalidInput("normalizer: widths do not match state width " + std::to_string(state_width));
    }
    auto check = [](const std::vector<double>& v, bool positive) {
        for (double x : v) {
            if (!std::isfinite(x) || (positive && x <= 0.0)) throw InvalidInput("normalizer: bad entry");
        }
    };
    check(state_mean, false);
    check(target_mean, false);
    check(state_scale, true);
    check(target_scale, true);
}

Normalizer fit_normalizer(std::span<const envs::Transition> data) {
    if (data.empty()) throw InvalidInput("fit_normalizer: empty data");
    const std::size_t n = data[0].s.size();
    Normalizer z;
    z.state_mean.assign(n, 0.0);
    z.state_scale.assign(n, 0.0);
    z.target_mean.assign(n + 1, 0.0);
    z.target_scale.assign(n + 1, 0.0);
    auto target = [n](const envs::Transition& tr, std::size_t j) { return j < n ? tr.s_next[j] - tr.s[j] : tr.r; };
    const double count = static_cast<double>(data.size());
    for (const auto& tr : data) {
        for (std::size_t j = 0; j < n; ++j) z.state_mean[j] += tr.s[j];
        for (std::size_t j = 0; j <= n; ++j) z.target_mean[j] += target(tr, j);
    }
    for (auto& x : z.state_mean) x /= count;
    for (auto& x : z.target_mean) x /= count;
    for (const auto& tr : data) {
        for (std::size_t j = 0; j < n; ++j) z.state_scale[j] += (tr.s[j] - z.state_mean[j]) * (tr.s[j] - z.state_mean[j]);
        for (std::size_t j = 0; j <= n; ++j) {
            const double d = target(tr, j) - z.target_mean[j];
            z.target_scale[j] += d * d;
        }
    }
    auto finish = [count](std::vector<double>& v) {
        for (auto& x : v) {
            x = std::sqrt(x / count);
            if (x < 1e-8) x = 1.0;
        }
    };
    finish(z.state_scale);
    finish(z.target_scale);
    return z;
}

nlohmann::json normalizer_to_json(const Normalizer& z) {
    return {{"state_mean", z.state_mean},
            {"state_scale", z.state_scale},
            {"target_mean", z.target_mean},
            {"target_scale", z.target_scale}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
    try {
        Normalizer z;
        z.state_mean = j.at("state_mean").get<std::vector<double>>();
        z.state_scale = j.at("state_scale").get<std::vector<double>>();
        z.target_mean = j.at("target_mean").get<std::vector<double>>();
        z.target_scale = j.at("target_scale").get<std::vector<double>>();
        return z;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("normalizer: ") + e.what());
    }
}

D2PModelConfig match_parameter_count(D2PModelConfig base, std::size_t target, double tolerance) {
    std::size_t best_hidden = 1;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t hidden = 1; hidden <= 4096; ++hidden) {
        base.kernel_hidden = hidden;
        const double count = static_cast<double>(base.parameter_count());
        const double gap = std::abs(count - static_cast<double>(target));
        if (gap < best_gap) {
            best_gap = gap;
            best_hidden = hidden;
        }
        if (count > static_cast<double>(target)) break;
    }
    base.kernel_hidden = best_hidden;
    const double rel = best_gap / static_cast<double>(target);
    if (rel > tolerance) {
        throw InvalidInput("cannot match parameter count " + std::to_string(target) + " within " +
                           std::to_string(tolerance * 100) + "% (best " + std::to_string(base.parameter_count()) + ")");
    }
    return base;
}

D2PModel::D2PModel(D2PModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng = make_rng(init_seed, "init");
    for (std::size_t k = 0; k < config_.kernel_count(); ++k) {
        const std::string prefix = "kernel" + std::to_string(k) + ".";
        const std::size_t inputs = config_.kernel_inputs(k).size();
        if (config_.kernel_kind == KernelKind::nonrecurrent) {
            nn::append_mlp_params(params_, kernel_mlp_spec(config_, inputs), prefix, rng);
        } else {
            nn::append_mlp_params(params_, kernel_embed_spec(config_, inputs), prefix + "embed.", rng);
            nn::append_gru_params(params_, kernel_gru_spec(config_), prefix + "gru.", rng);
        }
    }
    nn::append_mlp_params(params_, decoder_spec(config_), "decoder.", rng);
    nn::append_mlp_params(params_, reward_spec(config_), "reward.", rng);
    build_layout();
}

D2PModel::D2PModel(D2PModelConfig config, nn::ParamSet params) : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
    build_layout();
    // Compare against a freshly laid-out model of the same config.
    D2PModel reference(config_, 0);
    if (reference.params_.size() != params_.size()) {
        throw InvalidInput("model parameters: expected " + std::to_string(reference.params_.size()) + " tensors, got " +
                           std::to_string(params_.size()));
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (reference.params_[i].shape != params_[i].shape) {
            throw InvalidInput("model parameters: tensor " + std::to_string(i) + " ('" + params_.name(i) +
                               "') has the wrong shape");
        }
        if (!params_[i].all_finite()) throw InvalidInput("model parameters: non-finite value in '" + params_.name(i) + "'");
    }
}

void D2PModel::set_normalizer(Normalizer z) {
    z.validate(config_.state_width);
    normalizer_ = std::move(z);
}

std::size_t D2PModel::kernel_param_tensors() const {
    return config_.kernel_kind == KernelKind::nonrecurrent ? 4 : 2 + 9;
}

void D2PModel::build_layout() {
    const std::size_t k = config_.kernel_count();
    kernel_offsets_.clear();
    kernel_inputs_.clear();
    for (std::size_t i = 0; i < k; ++i) {
        kernel_offsets_.push_back(i * kernel_param_tensors());
        kernel_inputs_.push_back(config_.kernel_inputs(i));
    }
    decoder_offset_ = k * kernel_param_tensors();
    reward_offset_ = decoder_offset_ + 4;
    reduction_order_.resize(k);
    std::iota(reduction_order_.begin(), reduction_order_.end(), std::size_t{0});
    if (config_.variant == ModelVariant::decomposed) {
        std::stable_sort(reduction_order_.begin(), reduction_order_.end(), [&](std::size_t x, std::size_t y) {
            return kernel_inputs_[x].front() < kernel_inputs_[y].front();
        });
    }
}

namespace {

Matrix tiled(std::span<const double> row, Eigen::Index rows) {
    Matrix out(rows, static_cast<Eigen::Index>(row.size()));
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < row.size(); ++j) out(i, static_cast<Eigen::Index>(j)) = row[j];
    }
    return out;
}

// x * scale + shift, per column.
Var affine(Tape& tape, Var x, std::span<const double> scale, std::span<const double> shift) {
    const Eigen::Index rows = tape.value(x).rows();
    return tape.add(tape.mul(x, tape.constant(tiled(scale, rows))), tape.constant(tiled(shift, rows)));
}

// (x - mean) / scale, per column.
Var standardize(Tape& tape, Var x, std::span<const double> mean, std::span<const double> scale) {
    const Eigen::Index rows = tape.value(x).rows();
    std::vector<double> inv(scale.size());
    for (std::size_t j = 0; j < scale.size(); ++j) inv[j] = 1.0 / scale[j];
    return tape.mul(tape.sub(x, tape.constant(tiled(mean, rows))), tape.constant(tiled(inv, rows)));
}

}  // namespace

GraphOutput D2PModel::graph(Tape& tape, Var s, Var a, std::optional<Var> h_prev) const {
    const auto& sv = tape.value(s);
    const auto& av = tape.value(a);
    if (static_cast<std::size_t>(sv.cols()) != config_.state_width) {
        throw InvalidInput("model: state width " + std::to_string(sv.cols()) + ", expected " +
                           std::to_string(config_.state_width));
    }
    if (static_cast<std::size_t>(av.cols()) != config_.action_width) {
        throw InvalidInput("model: action width " + std::to_string(av.cols()) + ", expected " +
                           std::to_string(config_.action_width));
    }
    if (sv.rows() != av.rows()) throw InvalidInput("model: state and action batch sizes differ");
    if (recurrent()) {
        if (!h_prev) throw InvalidInput("model: recurrent kernel needs h_prev");
        const auto& hv = tape.value(*h_prev);
        if (static_cast<std::size_t>(hv.cols()) != config_.latent_width || hv.rows() != sv.rows()) {
            throw InvalidInput("model: h_prev must be batch x " + std::to_string(config_.latent_width));
        }
    }

    const bool scaled = !normalizer_.identity();
    const std::size_t n = config_.state_width;
    const Normalizer& z = normalizer_;
    Var s_in = scaled ? standardize(tape, s, z.state_mean, z.state_scale) : s;

    GraphOutput out;
    out.per_kernel.resize(config_.kernel_count());
    for (std::size_t k = 0; k < config_.kernel_count(); ++k) {
        Var sub = tape.select_cols(a, kernel_inputs_[k]);
        Var parts[2] = {s_in, sub};
        Var x = tape.concat_cols(parts);
        const std::size_t inputs = kernel_inputs_[k].size();
        if (config_.kernel_kind == KernelKind::nonrecurrent) {
            out.per_kernel[k] = nn::mlp_graph(tape, kernel_mlp_spec(config_, inputs), kernel_offsets_[k], x);
        } else {
            Var e = apply_activation(tape, config_.activation,
                                     nn::mlp_graph(tape, kernel_embed_spec(config_, inputs), kernel_offsets_[k], x));
            out.per_kernel[k] = nn::gru_graph(tape, kernel_gru_spec(config_), kernel_offsets_[k] + 2, *h_prev, e);
        }
    }
    std::vector<Var> ordered;
    ordered.reserve(reduction_order_.size());
    for (auto k : reduction_order_) ordered.push_back(out.per_kernel[k]);
    out.h = tape.mean(ordered);
    Var dec = nn::mlp_graph(tape, decoder_spec(config_), decoder_offset_, out.h);
    Var r_out = nn::mlp_graph(tape, reward_spec(config_), reward_offset_, out.h);
    std::span<const double> tm(z.target_mean), ts(z.target_scale);
    if (config_.predict_delta) {
        out.delta = scaled ? affine(tape, dec, ts.first(n), tm.first(n)) : dec;
        out.s_pred = tape.add(s, out.delta);
    } else {
        out.s_pred = scaled ? affine(tape, dec, z.state_scale, z.state_mean) : dec;
        out.delta = tape.sub(out.s_pred, s);
    }
    out.r_pred = scaled ? affine(tape, r_out, ts.subspan(n), tm.subspan(n)) : r_out;
    if (scaled && config_.predict_delta) {
        Var parts[2] = {dec, r_out};
        out.standardized = tape.concat_cols(parts);
    } else {
        Var parts[2] = {out.delta, out.r_pred};
        out.standardized = tape.concat_cols(parts);
        if (scaled) out.standardized = standardize(tape, out.standardized, tm, ts);
    }
    return out;
}

Prediction D2PModel::forward(const Matrix& s, const Matrix& a, const Matrix* h_prev) const {
    Tape tape(&params_, false);
    Var sv = tape.constant(s);
    Var av = tape.constant(a);
    std::optional<Var> hv;
    if (recurrent()) {
        hv = tape.constant(h_prev ? *h_prev : Matrix::Zero(s.rows(), static_cast<Eigen::Index>(config_.latent_width)));
    }
    GraphOutput g = graph(tape, sv, av, hv);
    Prediction p;
    p.latent.h = tape.value(g.h);
    for (Var k : g.per_kernel) p.latent.per_kernel.push_back(tape.value(k));
    p.s_pred = tape.value(g.s_pred);
    p.r_pred = tape.value(g.r_pred);
    return p;
}

nlohmann::json D2PModel::checkpoint() const {
    nlohmann::json spec = config_to_json(config_);
    if (!normalizer_.identity()) spec["normalizer"] = normalizer_to_json(normalizer_);
    return nn::checkpoint_to_json(spec, params_);
}

D2PModel D2PModel::from_checkpoint(const nlohmann::json& doc) {
    nlohmann::json spec;
    nn::ParamSet params = nn::checkpoint_from_json(doc, &spec);
    D2PModel model(config_from_json(spec), std::move(params));
    if (spec.contains("normalizer")) model.set_normalizer(normalizer_from_json(spec.at("normalizer")));
    return model;
}

std::vector<std::vector<double>> split_action(std::span<const double> a, const sd2::Partition& partition) {
    if (a.size() != partition.action_width()) {
        throw InvalidInput("split_action: action width " + std::to_string(a.size()) + ", partition covers " +
                           std::to_string(partition.action_width()));
    }
    std::vector<std::vector<double>> out;
    for (const auto& g : partition.groups()) {
        std::vector<double> sub;
        for (auto i : g) sub.push_back(a[i]);
        out.push_back(std::move(sub));
    }
    return out;
}

namespace {

StepOutput single(const D2PModel& model, std::span<const double> s, std::span<const double> a,
                  std::span<const double> h_prev) {
    Matrix sm = nn::row_matrix(s);
    Matrix am = nn::row_matrix(a);
    Matrix hm;
    const Matrix* hp = nullptr;
    if (model.recurrent()) {
        if (h_prev.size() != model.config().latent_width) {
            throw InvalidInput("forward: h_prev width " + std::to_string(h_prev.size()) + ", expected " +
                               std::to_string(model.config().latent_width));
        }
        hm = nn::row_matrix(h_prev);
        hp = &hm;
    }
    Prediction p = model.forward(sm, am, hp);
    StepOutput out;
    out.latent = std::move(p.latent);
    out.s_pred.assign(p.s_pred.data(), p.s_pred.data() + p.s_pred.size());
    out.r_pred = p.r_pred(0, 0);
    return out;
}

void require(bool ok, const char* what) {
    if (!ok) throw InvalidInput(what);
}

}  // namespace

StepOutput d2p_forward_nonrec(const D2PModel& model, std::span<const double> s, std::span<const double> a) {
    require(!model.recurrent(), "d2p_forward_nonrec: model has recurrent kernels");
    return single(model, s, a, {});
}

StepOutput d2p_forward_rec(const D2PModel& model, std::span<const double> h_prev, std::span<const double> s,
                           std::span<const double> a) {
    require(model.recurrent(), "d2p_forward_rec: model has non-recurrent kernels");
    return single(model, s, a, h_prev);
}

StepOutput kernel_ensemble_forward(const D2PModel& model, std::span<const double> s, std::span<const double> a,
                                   std::span<const double> h_prev) {
    require(model.config().variant == ModelVariant::kernel_ensemble, "kernel_ensemble_forward: not an ensemble model");
    return single(model, s, a, h_prev);
}

StepOutput monolithic_forward(const D2PModel& model, std::span<const double> s, std::span<const double> a,
                              std::span<const double> h_prev) {
    require(model.config().variant == ModelVariant::monolithic, "monolithic_forward: not a monolithic model");
    return single(model, s, a, h_prev);
}

}  // namespace ed2::d2p
