#pragma once

#include "ed2/common/rng.hpp"
#include "ed2/nn/tape.hpp"
#include "ed2/nn/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ed2::nn {

enum class Activation { tanh, relu, identity };

std::string to_string(Activation a);
Activation activation_from_string(std::string_view s);

// Feed-forward stack; `activation` applies to hidden layers only, the output layer is affine.
struct MlpSpec {
    std::vector<std::size_t> layer_widths;
    Activation activation = Activation::tanh;

    void validate() const;
    std::size_t layer_count() const { return layer_widths.size() - 1; }
    std::size_t param_count() const;
    bool operator==(const MlpSpec&) const = default;
};

struct GruSpec {
    std::size_t input_width = 0;
    std::size_t hidden_width = 0;

    void validate() const;
    std::size_t param_count() const;
    bool operator==(const GruSpec&) const = default;
};

// Appends W{l} [in,out] and b{l} [out] per layer under `prefix`, initialised uniformly in
// [-1/sqrt(fan_in), 1/sqrt(fan_in)]. Returns the index of the first appended tensor.
std::size_t append_mlp_params(ParamSet& params, const MlpSpec& spec, std::string_view prefix, Rng& rng);

// Appends Wz Uz bz Wr Ur br Wn Un bn under `prefix`. Returns the first index.
std::size_t append_gru_params(ParamSet& params, const GruSpec& spec, std::string_view prefix, Rng& rng);

// x: batch x layer_widths[0]. Throws InvalidInput naming the layer whose shapes disagree.
Var mlp_graph(Tape& tape, const MlpSpec& spec, std::size_t first_param, Var x);

// One gated recurrent step for a batch:
//   z = sigmoid(x Wz + h Uz + bz),  r = sigmoid(x Wr + h Ur + br)
//   n = tanh(x Wn + (r * h) Un + bn),  h' = (1 - z) * n + z * h
Var gru_graph(Tape& tape, const GruSpec& spec, std::size_t first_param, Var h_prev, Var x);

// Single-sample conveniences over a ParamSet that holds exactly this layer from index 0.
std::vector<double> mlp_forward(const MlpSpec& spec, const ParamSet& params, std::span<const double> x);
std::vector<double> gru_step(const GruSpec& spec, const ParamSet& params, std::span<const double> h_prev,
                             std::span<const double> x);

Matrix row_matrix(std::span<const double> x);

void to_json(nlohmann::json& j, const MlpSpec& s);
void from_json(const nlohmann::json& j, MlpSpec& s);
void to_json(nlohmann::json& j, const GruSpec& s);
void from_json(const nlohmann::json& j, GruSpec& s);

}  // namespace ed2::nn
