#include "ed2/sd2/cluster.hpp"

#include "ed2/common/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ed2::sd2 {

namespace {

// Plain left-to-right sums, so Rela values are reproducible bit for bit.
double cosine(const FeatureMatrix& f, std::size_t x, std::size_t y) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t k = 0; k < f.state_width(); ++k) {
        const double a = f(x, k), b = f(y, k);
        ab += a * b;
        aa += a * a;
        bb += b * b;
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

Group complement(const Group& g, std::size_t m) {
    Group out;
    for (std::size_t i = 0; i < m; ++i) {
        if (!std::binary_search(g.begin(), g.end(), i)) out.push_back(i);
    }
    return out;
}

}  // namespace

double cluster_similarity(const Group& a, const Group& b, const FeatureMatrix& features) {
    if (a.empty() || b.empty()) throw InvalidInput("cluster_similarity: empty group");
    double total = 0.0;
    for (auto x : a) {
        for (auto y : b) {
            if (x >= features.action_width() || y >= features.action_width()) {
                throw InvalidInput("cluster_similarity: index out of range");
            }
            total += cosine(features, x, y);
        }
    }
    return total / static_cast<double>(a.size() * b.size());
}

double rela(const Group& a, const Group& b, const FeatureMatrix& features) {
    if (a == b) throw InvalidInput("rela: the two clusters must differ");
    const std::size_t m = features.action_width();
    Group sa = a;
    Group sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const Group not_a = complement(sa, m);
    const Group not_b = complement(sb, m);
    if (not_a.empty() || not_b.empty()) throw InvalidInput("rela: a cluster covers every action dimension");
    const double w_b_nota = static_cast<double>(sb.size() * not_a.size());
    const double w_a_notb = static_cast<double>(sa.size() * not_b.size());
    const double outside = (cluster_similarity(sb, not_a, features) * w_b_nota +
                            cluster_similarity(sa, not_b, features) * w_a_notb) /
                           (w_a_notb + w_b_nota);
    return cluster_similarity(sa, sb, features) - outside;
}

double rela(const Group& a, const Group& b, const Partition& context, const FeatureMatrix& features) {
    const auto& groups = context.groups();
    auto is_member = [&](const Group& g) {
        Group s = g;
        std::sort(s.begin(), s.end());
        return std::find(groups.begin(), groups.end(), s) != groups.end();
    };
    if (!is_member(a) || !is_member(b)) throw InvalidInput("rela: clusters must belong to the partition");
    return rela(a, b, features);
}

ClusterResult sd2_cluster(const FeatureMatrix& features, double eta) {
    const std::size_t m = features.action_width();
    if (m == 0) throw InvalidInput("sd2_cluster: no action dimensions");
    std::vector<Group> clusters;
    for (std::size_t i = 0; i < m; ++i) clusters.push_back({i});

    ClusterResult result;
    while (clusters.size() > 1) {
        // clusters stay sorted by minimum element, so (i, j) with i < j walks pairs in
        // lexicographic (min a, min b) order and the first maximum wins ties.
        std::size_t best_i = 0;
        std::size_t best_j = 1;
        double best = -INFINITY;
        bool found = false;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double r = rela(clusters[i], clusters[j], features);
                if (!found || r > best) {
                    best = r;
                    best_i = i;
                    best_j = j;
                    found = true;
                }
            }
        }
        MergeStep step{clusters[best_i], clusters[best_j], best, best > eta};
        result.trace.push_back(step);
        if (!step.merged) break;
        Group merged = clusters[best_i];
        merged.insert(merged.end(), clusters[best_j].begin(), clusters[best_j].end());
        std::sort(merged.begin(), merged.end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_j));
        clusters[best_i] = std::move(merged);
        std::sort(clusters.begin(), clusters.end(), [](const Group& x, const Group& y) { return x.front() < y.front(); });
    }
    result.partition = Partition::from_groups(clusters, m);
    return result;
}

}  // namespace ed2::sd2
