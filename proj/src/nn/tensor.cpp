#include "ed2/nn/tensor.hpp"

#include "ed2/common/errors.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace ed2::nn {

ParamTensor ParamTensor::zeros(std::vector<std::size_t> shape) {
    ParamTensor t;
    std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    t.shape = std::move(shape);
    t.values.assign(n, 0.0);
    return t;
}

bool ParamTensor::consistent() const {
    if (shape.empty() || shape.size() > 2) return false;
    std::size_t n = 1;
    for (auto d : shape) {
        if (d == 0) return false;
        n *= d;
    }
    return n == values.size();
}

bool ParamTensor::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix ParamTensor::as_matrix() const {
    Matrix m(rows(), cols());
    std::copy(values.begin(), values.end(), m.data());
    return m;
}

std::size_t ParamSet::add(std::string name, ParamTensor tensor) {
    if (!tensor.consistent()) {
        throw InvalidInput("tensor '" + name + "' has a shape inconsistent with its values");
    }
    if (find(name)) throw InvalidInput("duplicate tensor name '" + name + "'");
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(tensor));
    return tensors_.size() - 1;
}

std::optional<std::size_t> ParamSet::find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

bool ParamSet::all_finite() const {
    for (const auto& t : tensors_) {
        if (!t.all_finite()) return false;
    }
    return true;
}

Gradients zero_gradients(const ParamSet& params) {
    Gradients g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) g[i].assign(params[i].size(), 0.0);
    return g;
}

}  // namespace ed2::nn
