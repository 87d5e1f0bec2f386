#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ed2::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense tensor, row-major. 1-D tensors are viewed as a single row.
struct ParamTensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    static ParamTensor zeros(std::vector<std::size_t> shape);

    std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
    std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }
    std::size_t size() const { return values.size(); }
    bool consistent() const;
    bool all_finite() const;

    Matrix as_matrix() const;

    bool operator==(const ParamTensor&) const = default;
};

// Ordered, named collection of tensors. Gradients and optimizer moments are aligned with it.
class ParamSet {
public:
    std::size_t add(std::string name, ParamTensor tensor);

    std::size_t size() const { return tensors_.size(); }
    ParamTensor& operator[](std::size_t i) { return tensors_[i]; }
    const ParamTensor& operator[](std::size_t i) const { return tensors_[i]; }
    const std::string& name(std::size_t i) const { return names_[i]; }
    std::optional<std::size_t> find(std::string_view name) const;

    // Total number of scalar parameters.
    std::size_t scalar_count() const;
    bool all_finite() const;

    bool operator==(const ParamSet&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<ParamTensor> tensors_;
};

// One flat value vector per tensor of a ParamSet.
using Gradients = std::vector<std::vector<double>>;

Gradients zero_gradients(const ParamSet& params);

}  // namespace ed2::nn
