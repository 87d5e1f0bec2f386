#pragma once

#include "ed2/envs/dataset.hpp"
#include "ed2/nn/tensor.hpp"

#include <cstddef>

namespace ed2::sd2 {

// |Pearson(a^i, delta s^j)| for every action dimension i (rows) and state dimension j (cols).
// Row i is the feature vector F^i of action dimension i.
struct FeatureMatrix {
    nn::Matrix values;  // m x n, entries in [0, 1]

    std::size_t action_width() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t state_width() const { return static_cast<std::size_t>(values.cols()); }
    double operator()(std::size_t i, std::size_t j) const {
        return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
};

// Pooled over all transitions, delta s = s_next - s. A column that never varies (all
// samples identical) has zero deviation and its coefficients are defined as 0.
// Throws InvalidInput with fewer than two transitions.
FeatureMatrix pearson_features(const envs::Dataset& dataset);

// Same over raw samples: `actions` is N x m, `deltas` is N x n.
FeatureMatrix pearson_features(const nn::Matrix& actions, const nn::Matrix& deltas);

}  // namespace ed2::sd2
