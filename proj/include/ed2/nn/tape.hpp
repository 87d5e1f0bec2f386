#pragma once

#include "ed2/nn/tensor.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ed2::nn {

// Handle to a node on a Tape.
struct Var {
    std::size_t id = 0;
};

// Reverse-mode computation tape scoped to one loss evaluation.
//
// Every node holds a matrix value (rows are batch samples). With recording off the tape
// only evaluates, which is how inference shares the exact same arithmetic as training.
class Tape {
public:
    explicit Tape(const ParamSet* params = nullptr, bool record = true);

    Var constant(Matrix value);
    // Leaf bound to tensor `index` of the ParamSet given at construction.
    Var param(std::size_t index);

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    // Gradient of the last backward() seed w.r.t. this node; zero-shaped if never reached.
    const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    // a + row broadcast over all rows of a.
    Var add_row(Var a, Var row);
    Var scale(Var a, double c);
    Var one_minus(Var a);
    Var tanh(Var a);
    Var relu(Var a);
    Var sigmoid(Var a);
    Var concat_cols(std::span<const Var> parts);
    Var select_cols(Var a, std::span<const std::size_t> cols);
    // Element-wise mean of same-shaped nodes, summed in the given order.
    Var mean(std::span<const Var> parts);
    Var sum(Var a);
    // Mean of squared entries of (a - target); a 1x1 node.
    Var mse(Var a, const Matrix& target);

    // Reverse sweep from a 1x1 node. Throws InvalidInput for a non-scalar loss.
    void backward(Var loss, double seed = 1.0);

    // Gradients for every tensor of the bound ParamSet; zero for tensors never used.
    Gradients param_gradients() const;

    std::size_t node_count() const { return nodes_.size(); }
    const ParamSet* params() const { return params_; }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&, std::size_t)> back;
    };

    Var push(Matrix value, std::function<void(Tape&, std::size_t)> back);
    Matrix& grad_slot(std::size_t id);
    void require_same_shape(Var a, Var b, const char* op) const;

    const ParamSet* params_;
    bool record_;
    std::vector<Node> nodes_;
    std::vector<std::pair<std::size_t, std::size_t>> param_nodes_;  // (node id, tensor index)
};

}  // namespace ed2::nn
