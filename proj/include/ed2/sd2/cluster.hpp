#pragma once

#include "ed2/sd2/features.hpp"
#include "ed2/sd2/partition.hpp"

#include <vector>

namespace ed2::sd2 {

inline constexpr double kDefaultEta = 0.0;

// Thresholds tuned for the MuJoCo locomotion tasks; reference values only.
struct ReferenceEta {
    const char* environment;
    double eta;
};
inline constexpr ReferenceEta kReferenceEtas[] = {
    {"Hopper (DeepMind Control)", 0.0},     {"Walker (DeepMind Control)", -0.06},
    {"Cheetah (DeepMind Control)", -0.1},   {"Humanoid (DeepMind Control)", 0.0},
    {"Reacher (DeepMind Control)", 0.0},    {"Finger (DeepMind Control)", 0.0},
    {"HalfCheetah (Gym MuJoCo)", 0.0},      {"Hopper (Gym MuJoCo)", -0.3},
    {"Walker (Gym MuJoCo)", -0.2},          {"Ant (Gym MuJoCo)", -0.12},
};

// Mean pairwise cosine similarity of feature rows x in a, y in b. Zero rows have cosine 0
// with everything, themselves included.
double cluster_similarity(const Group& a, const Group& b, const FeatureMatrix& features);

// Relatedness of two clusters: their similarity minus the size-weighted average of each
// one's similarity to the complement of the other. Complements are raw index sets over all
// action dimensions. Throws InvalidInput when a == b.
double rela(const Group& a, const Group& b, const FeatureMatrix& features);
// Checks that a and b are distinct members of `context` before scoring.
double rela(const Group& a, const Group& b, const Partition& context, const FeatureMatrix& features);

struct MergeStep {
    Group first;   // cluster with the smaller minimum element
    Group second;
    double rela = 0.0;
    bool merged = false;
};

struct ClusterResult {
    Partition partition;
    // One entry per argmax evaluation; the last one is the rejected candidate unless
    // clustering ended with a single cluster.
    std::vector<MergeStep> trace;
};

// Agglomerative loop from singletons: merge the argmax-relatedness pair while its score is
// strictly greater than eta. Ties go to the lexicographically smallest (min a, min b).
ClusterResult sd2_cluster(const FeatureMatrix& features, double eta);

}  // namespace ed2::sd2
