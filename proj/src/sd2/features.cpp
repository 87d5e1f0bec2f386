#include "ed2/sd2/features.hpp"

#include "ed2/common/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ed2::sd2 {

namespace {

// Centered columns; a constant column is exactly zero.
nn::Matrix centered(const nn::Matrix& x) {
    nn::Matrix c(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto col = x.col(j);
        if ((col.array() == col(0)).all()) {
            c.col(j).setZero();
            continue;
        }
        const double mean = col.sum() / static_cast<double>(x.rows());
        c.col(j) = col.array() - mean;
    }
    return c;
}

}  // namespace

FeatureMatrix pearson_features(const nn::Matrix& actions, const nn::Matrix& deltas) {
    if (actions.rows() != deltas.rows()) throw InvalidInput("pearson_features: sample count mismatch");
    if (actions.rows() < 2) throw InvalidInput("pearson_features: need at least two transitions");
    const nn::Matrix ca = centered(actions);
    const nn::Matrix cd = centered(deltas);
    const Eigen::VectorXd na = ca.colwise().norm();
    const Eigen::VectorXd nd = cd.colwise().norm();
    const nn::Matrix cov = ca.transpose() * cd;

    FeatureMatrix f;
    f.values = nn::Matrix::Zero(actions.cols(), deltas.cols());
    for (Eigen::Index i = 0; i < actions.cols(); ++i) {
        for (Eigen::Index j = 0; j < deltas.cols(); ++j) {
            if (na(i) == 0.0 || nd(j) == 0.0) continue;
            f.values(i, j) = std::min(1.0, std::abs(cov(i, j)) / (na(i) * nd(j)));
        }
    }
    return f;
}

FeatureMatrix pearson_features(const envs::Dataset& dataset) {
    if (dataset.size() < 2) throw InvalidInput("pearson_features: need at least two transitions");
    const auto rows = static_cast<Eigen::Index>(dataset.size());
    const auto m = static_cast<Eigen::Index>(dataset.meta.m);
    const auto n = static_cast<Eigen::Index>(dataset.meta.n);
    nn::Matrix actions(rows, m);
    nn::Matrix deltas(rows, n);
    for (Eigen::Index k = 0; k < rows; ++k) {
        const auto& tr = dataset.transitions[static_cast<std::size_t>(k)];
        if (static_cast<Eigen::Index>(tr.a.size()) != m || static_cast<Eigen::Index>(tr.s.size()) != n ||
            static_cast<Eigen::Index>(tr.s_next.size()) != n) {
            throw InvalidInput("pearson_features: transition " + std::to_string(k) + " has wrong widths");
        }
        for (Eigen::Index i = 0; i < m; ++i) actions(k, i) = tr.a[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) {
            deltas(k, j) = tr.s_next[static_cast<std::size_t>(j)] - tr.s[static_cast<std::size_t>(j)];
        }
    }
    return pearson_features(actions, deltas);
}

}  // namespace ed2::sd2
