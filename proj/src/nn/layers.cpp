#include "ed2/nn/layers.hpp"

#include "ed2/common/errors.hpp"

#include <cmath>

namespace ed2::nn {

namespace {

ParamTensor uniform_tensor(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    ParamTensor t = ParamTensor::zeros(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.values) v = dist(rng);
    return t;
}

Var apply(Tape& tape, Activation act, Var x) {
    switch (act) {
        case Activation::tanh: return tape.tanh(x);
        case Activation::relu: return tape.relu(x);
        case Activation::identity: return x;
    }
    return x;
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::identity: return "identity";
    }
    return "tanh";
}

Activation activation_from_string(std::string_view s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw InvalidInput("unknown activation '" + std::string(s) + "'");
}

void MlpSpec::validate() const {
    if (layer_widths.size() < 2) throw InvalidInput("MlpSpec needs at least two layer widths");
    for (auto w : layer_widths) {
        if (w == 0) throw InvalidInput("MlpSpec layer widths must be positive");
    }
}

std::size_t MlpSpec::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
        n += layer_widths[l] * layer_widths[l + 1] + layer_widths[l + 1];
    }
    return n;
}

void GruSpec::validate() const {
    if (input_width == 0 || hidden_width == 0) throw InvalidInput("GruSpec widths must be >= 1");
}

std::size_t GruSpec::param_count() const {
    return 3 * (input_width * hidden_width + hidden_width * hidden_width + hidden_width);
}

std::size_t append_mlp_params(ParamSet& params, const MlpSpec& spec, std::string_view prefix, Rng& rng) {
    spec.validate();
    const std::size_t first = params.size();
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t in = spec.layer_widths[l];
        const std::size_t out = spec.layer_widths[l + 1];
        params.add(std::string(prefix) + "W" + std::to_string(l), uniform_tensor({in, out}, in, rng));
        params.add(std::string(prefix) + "b" + std::to_string(l), uniform_tensor({out}, in, rng));
    }
    return first;
}

std::size_t append_gru_params(ParamSet& params, const GruSpec& spec, std::string_view prefix, Rng& rng) {
    spec.validate();
    const std::size_t first = params.size();
    const std::size_t in = spec.input_width;
    const std::size_t h = spec.hidden_width;
    const std::size_t fan_in = in + h;
    for (const char* gate : {"z", "r", "n"}) {
        params.add(std::string(prefix) + "W" + gate, uniform_tensor({in, h}, fan_in, rng));
        params.add(std::string(prefix) + "U" + gate, uniform_tensor({h, h}, fan_in, rng));
        params.add(std::string(prefix) + "b" + gate, uniform_tensor({h}, fan_in, rng));
    }
    return first;
}

Var mlp_graph(Tape& tape, const MlpSpec& spec, std::size_t first_param, Var x) {
    spec.validate();
    if (static_cast<std::size_t>(tape.value(x).cols()) != spec.layer_widths[0]) {
        throw InvalidInput("mlp layer 0: input width " + std::to_string(tape.value(x).cols()) +
                           ", expected " + std::to_string(spec.layer_widths[0]));
    }
    Var h = x;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t wi = first_param + 2 * l;
        if (tape.params() == nullptr || wi + 1 >= tape.params()->size()) {
            throw InvalidInput("mlp layer " + std::to_string(l) + ": missing parameter tensors");
        }
        Var w = tape.param(wi);
        Var b = tape.param(wi + 1);
        if (static_cast<std::size_t>(tape.value(w).rows()) != spec.layer_widths[l] ||
            static_cast<std::size_t>(tape.value(w).cols()) != spec.layer_widths[l + 1] ||
            static_cast<std::size_t>(tape.value(b).cols()) != spec.layer_widths[l + 1] ||
            tape.value(b).rows() != 1) {
            throw InvalidInput("mlp layer " + std::to_string(l) + ": parameter shapes do not match spec");
        }
        h = tape.add_row(tape.matmul(h, w), b);
        if (l + 1 < spec.layer_count()) h = apply(tape, spec.activation, h);
    }
    return h;
}

Var gru_graph(Tape& tape, const GruSpec& spec, std::size_t first_param, Var h_prev, Var x) {
    spec.validate();
    const auto& hv = tape.value(h_prev);
    const auto& xv = tape.value(x);
    if (static_cast<std::size_t>(hv.cols()) != spec.hidden_width) {
        throw InvalidInput("gru: hidden width " + std::to_string(hv.cols()) + ", expected " +
                           std::to_string(spec.hidden_width));
    }
    if (static_cast<std::size_t>(xv.cols()) != spec.input_width) {
        throw InvalidInput("gru: input width " + std::to_string(xv.cols()) + ", expected " +
                           std::to_string(spec.input_width));
    }
    if (hv.rows() != xv.rows()) throw InvalidInput("gru: batch size mismatch between h_prev and x");

    Var p[9];
    for (std::size_t i = 0; i < 9; ++i) p[i] = tape.param(first_param + i);
    for (std::size_t g = 0; g < 3; ++g) {
        const auto& w = tape.value(p[3 * g]);
        const auto& u = tape.value(p[3 * g + 1]);
        const auto& b = tape.value(p[3 * g + 2]);
        if (static_cast<std::size_t>(w.rows()) != spec.input_width ||
            static_cast<std::size_t>(w.cols()) != spec.hidden_width ||
            static_cast<std::size_t>(u.rows()) != spec.hidden_width ||
            static_cast<std::size_t>(u.cols()) != spec.hidden_width ||
            static_cast<std::size_t>(b.cols()) != spec.hidden_width) {
            throw InvalidInput("gru: parameter shapes do not match spec");
        }
    }
    auto gate = [&](std::size_t g, Var hin) {
        return tape.add_row(tape.add(tape.matmul(x, p[3 * g]), tape.matmul(hin, p[3 * g + 1])), p[3 * g + 2]);
    };
    Var z = tape.sigmoid(gate(0, h_prev));
    Var r = tape.sigmoid(gate(1, h_prev));
    Var n = tape.tanh(gate(2, tape.mul(r, h_prev)));
    return tape.add(tape.mul(tape.one_minus(z), n), tape.mul(z, h_prev));
}

Matrix row_matrix(std::span<const double> x) {
    Matrix m(1, static_cast<Eigen::Index>(x.size()));
    std::copy(x.begin(), x.end(), m.data());
    return m;
}

std::vector<double> mlp_forward(const MlpSpec& spec, const ParamSet& params, std::span<const double> x) {
    Tape tape(&params, false);
    Var out = mlp_graph(tape, spec, 0, tape.constant(row_matrix(x)));
    const Matrix& v = tape.value(out);
    return {v.data(), v.data() + v.size()};
}

std::vector<double> gru_step(const GruSpec& spec, const ParamSet& params, std::span<const double> h_prev,
                             std::span<const double> x) {
    Tape tape(&params, false);
    Var out = gru_graph(tape, spec, 0, tape.constant(row_matrix(h_prev)), tape.constant(row_matrix(x)));
    const Matrix& v = tape.value(out);
    return {v.data(), v.data() + v.size()};
}

void to_json(nlohmann::json& j, const MlpSpec& s) {
    j = nlohmann::json{{"layer_widths", s.layer_widths}, {"activation", to_string(s.activation)}};
}

void from_json(const nlohmann::json& j, MlpSpec& s) {
    s.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
    s.activation = activation_from_string(j.at("activation").get<std::string>());
}

void to_json(nlohmann::json& j, const GruSpec& s) {
    j = nlohmann::json{{"input_width", s.input_width}, {"hidden_width", s.hidden_width}};
}

void from_json(const nlohmann::json& j, GruSpec& s) {
    s.input_width = j.at("input_width").get<std::size_t>();
    s.hidden_width = j.at("hidden_width").get<std::size_t>();
}

}  // namespace ed2::nn
