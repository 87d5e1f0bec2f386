#include "ed2/nn/tape.hpp"

#include "ed2/common/errors.hpp"

#include <cmath>
#include <string>

namespace ed2::nn {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Tape::Tape(const ParamSet* params, bool record) : params_(params), record_(record) {
    nodes_.reserve(64);
}

Var Tape::push(Matrix value, std::function<void(Tape&, std::size_t)> back) {
    Node node;
    node.value = std::move(value);
    if (record_) node.back = std::move(back);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

Matrix& Tape::grad_slot(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0 && n.value.size() != 0) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

void Tape::require_same_shape(Var a, Var b, const char* op) const {
    const Matrix& x = value(a);
    const Matrix& y = value(b);
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
        throw InvalidInput(std::string(op) + ": shape mismatch " + shape_str(x) + " vs " + shape_str(y));
    }
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::param(std::size_t index) {
    if (params_ == nullptr || index >= params_->size()) {
        throw InvalidInput("tape has no parameter tensor " + std::to_string(index));
    }
    Var v = push((*params_)[index].as_matrix(), nullptr);
    param_nodes_.emplace_back(v.id, index);
    return v;
}

Var Tape::matmul(Var a, Var b) {
    const Matrix& x = value(a);
    const Matrix& y = value(b);
    if (x.cols() != y.rows()) {
        throw InvalidInput("matmul: inner dimensions " + shape_str(x) + " * " + shape_str(y));
    }
    Matrix out = x * y;
    return push(std::move(out), [a, b](Tape& t, std::size_t self) {
        const Matrix& g = t.nodes_[self].grad;
        t.grad_slot(a.id).noalias() += g * t.value(b).transpose();
        t.grad_slot(b.id).noalias() += t.value(a).transpose() * g;
    });
}

Var Tape::add(Var a, Var b) {
    require_same_shape(a, b, "add");
    return push(value(a) + value(b), [a, b](Tape& t, std::size_t self) {
        const Matrix& g = t.nodes_[self].grad;
        t.grad_slot(a.id) += g;
        t.grad_slot(b.id) += g;
    });
}

Var Tape::sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    return push(value(a) - value(b), [a, b](Tape& t, std::size_t self) {
        const Matrix& g = t.nodes_[self].grad;
        t.grad_slot(a.id) += g;
        t.grad_slot(b.id) -= g;
    });
}

Var Tape::mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, std::size_t self) {
        const Matrix& g = t.nodes_[self].grad;
        t.grad_slot(a.id) += g.cwiseProduct(t.value(b));
        t.grad_slot(b.id) += g.cwiseProduct(t.value(a));
    });
}

Var Tape::add_row(Var a, Var row) {
    const Matrix& x = value(a);
    const Matrix& r = value(row);
    if (r.rows() != 1 || r.cols() != x.cols()) {
        throw InvalidInput("add_row: row " + shape_str(r) + " does not broadcast over " + shape_str(x));
    }
    Matrix out = x.rowwise() + r.row(0);
    return push(std::move(out), [a, row](Tape& t, std::size_t self) {
        const Matrix& g = t.nodes_[self].grad;
        t.grad_slot(a.id) += g;
        t.grad_slot(row.id) += g.colwise().sum();
    });
}

Var Tape::scale(Var a, double c) {
    return push(value(a) * c, [a, c](Tape& t, std::size_t self) {
        t.grad_slot(a.id) += t.nodes_[self].grad * c;
    });
}

Var Tape::one_minus(Var a) {
    return push((1.0 - value(a).array()).matrix(), [a](Tape& t, std::size_t self) {
        t.grad_slot(a.id) -= t.nodes_[self].grad;
    });
}

Var Tape::tanh(Var a) {
    Matrix out = value(a).array().tanh().matrix();
    return push(std::move(out), [a](Tape& t, std::size_t self) {
        const Matrix& y = t.nodes_[self].value;
        t.grad_slot(a.id).array() += t.nodes_[self].grad.array() * (1.0 - y.array().square());
    });
}

Var Tape::relu(Var a) {
    Matrix out = value(a).cwiseMax(0.0);
    return push(std::move(out), [a](Tape& t, std::size_t self) {
        const Matrix& x = t.value(a);
        t.grad_slot(a.id).array() += (x.array() > 0.0).select(t.nodes_[self].grad.array(), 0.0);
    });
}

Var Tape::sigmoid(Var a) {
    Matrix out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
    return push(std::move(out), [a](Tape& t, std::size_t self) {
        const Matrix& y = t.nodes_[self].value;
        t.grad_slot(a.id).array() += t.nodes_[self].grad.array() * y.array() * (1.0 - y.array());
    });
}

Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw InvalidInput("concat_cols: no inputs");
    Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    for (Var p : parts) {
        if (value(p).rows() != rows) throw InvalidInput("concat_cols: row count mismatch");
        cols += value(p).cols();
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        out.middleCols(at, value(p).cols()) = value(p);
        at += value(p).cols();
    }
    std::vector<Var> ids(parts.begin(), parts.end());
    return push(std::move(out), [ids](Tape& t, std::size_t self) {
        Eigen::Index at = 0;
        for (Var p : ids) {
            Eigen::Index c = t.value(p).cols();
            t.grad_slot(p.id) += t.nodes_[self].grad.middleCols(at, c);
            at += c;
        }
    });
}

Var Tape::select_cols(Var a, std::span<const std::size_t> cols) {
    const Matrix& x = value(a);
    Matrix out(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j] >= static_cast<std::size_t>(x.cols())) {
            throw InvalidInput("select_cols: column " + std::to_string(cols[j]) + " out of range");
        }
        out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(cols[j]));
    }
    std::vector<std::size_t> idx(cols.begin(), cols.end());
    return push(std::move(out), [a, idx](Tape& t, std::size_t self) {
        Matrix& ga = t.grad_slot(a.id);
        const Matrix& g = t.nodes_[self].grad;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            ga.col(static_cast<Eigen::Index>(idx[j])) += g.col(static_cast<Eigen::Index>(j));
        }
    });
}

Var Tape::mean(std::span<const Var> parts) {
    if (parts.empty()) throw InvalidInput("mean: no inputs");
    Matrix acc = value(parts[0]);
    for (std::size_t i = 1; i < parts.size(); ++i) {
        require_same_shape(parts[0], parts[i], "mean");
        acc += value(parts[i]);
    }
    const double inv = 1.0 / static_cast<double>(parts.size());
    acc /= static_cast<double>(parts.size());
    std::vector<Var> ids(parts.begin(), parts.end());
    return push(std::move(acc), [ids, inv](Tape& t, std::size_t self) {
        for (Var p : ids) t.grad_slot(p.id) += t.nodes_[self].grad * inv;
    });
}

Var Tape::sum(Var a) {
    Matrix out(1, 1);
    out(0, 0) = value(a).sum();
    return push(std::move(out), [a](Tape& t, std::size_t self) {
        t.grad_slot(a.id).array() += t.nodes_[self].grad(0, 0);
    });
}

Var Tape::mse(Var a, const Matrix& target) {
    const Matrix& x = value(a);
    if (x.rows() != target.rows() || x.cols() != target.cols()) {
        throw InvalidInput("mse: shape mismatch " + shape_str(x) + " vs target " + shape_str(target));
    }
    Matrix diff = x - target;
    const double n = static_cast<double>(diff.size());
    Matrix out(1, 1);
    out(0, 0) = diff.squaredNorm() / n;
    return push(std::move(out), [a, diff = std::move(diff), n](Tape& t, std::size_t self) {
        t.grad_slot(a.id) += diff * (2.0 * t.nodes_[self].grad(0, 0) / n);
    });
}

void Tape::backward(Var loss, double seed) {
    if (!record_) throw InvalidInput("backward on a tape that did not record");
    const Matrix& l = value(loss);
    if (l.rows() != 1 || l.cols() != 1) {
        throw InvalidInput("backward: loss must be scalar, got " + shape_str(l));
    }
    for (auto& n : nodes_) n.grad.resize(0, 0);
    grad_slot(loss.id)(0, 0) = seed;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.back && n.grad.size() != 0) n.back(*this, i);
    }
}

Gradients Tape::param_gradients() const {
    if (params_ == nullptr) return {};
    Gradients out = zero_gradients(*params_);
    for (auto [node, index] : param_nodes_) {
        const Matrix& g = nodes_[node].grad;
        if (g.size() == 0) continue;
        auto& dst = out[index];
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g.data()[k];
    }
    return out;
}

}  // namespace ed2::nn
