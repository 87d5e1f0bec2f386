#include "ed2/common/errors.hpp"
#include "ed2/common/io.hpp"
#include "ed2/common/rng.hpp"
#include "ed2/envs/block_env.hpp"
#include "ed2/sd2/cluster.hpp"
#include "ed2/sd2/features.hpp"
#include "ed2/sd2/partition.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace ed2;
using nn::Matrix;

namespace {

sd2::FeatureMatrix features(const oracle::Rows& rows) {
    sd2::FeatureMatrix f;
    f.values = Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) f.values(i, j) = rows[i][j];
    return f;
}

oracle::Rows random_rows(std::size_t m, std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    oracle::Rows r(m, oracle::Vec(n));
    for (auto& row : r)
        for (double& x : row) x = u(rng);
    return r;
}

Matrix column(std::initializer_list<double> xs) {
    Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::Index i = 0;
    for (double x : xs) m(i++, 0) = x;
    return m;
}

}  // namespace

TEST_CASE("pearson: perfect correlation and orthogonal deviations") {
    Matrix a = column({1, 2, 3});
    Matrix d(3, 2);
    d << 2, 1, 4, -1, 6, 1;
    const auto f = sd2::pearson_features(a, d);
    CHECK(f(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f(0, 1) == 0.0);
}

TEST_CASE("pearson: zero-variance columns map to zero") {
    Matrix a(4, 2), d(4, 2);
    a << 1, 5, 2, 5, 3, 5, 4, 5;
    d << 1, 7, 3, 7, 2, 7, 5, 7;
    const auto f = sd2::pearson_features(a, d);
    CHECK(f(1, 0) == 0.0);
    CHECK(f(1, 1) == 0.0);
    CHECK(f(0, 1) == 0.0);
    CHECK(f(0, 0) > 0.0);
}

TEST_CASE("pearson: rejects fewer than two transitions") {
    envs::Dataset d;
    d.meta.n = 2;
    d.meta.m = 1;
    CHECK_THROWS_AS(sd2::pearson_features(d), InvalidInput);
}

TEST_CASE("pearson: affine rescaling of an action leaves the matrix unchanged") {
    const auto data = envs::collect_random(envs::preset("blocks-2x3"), 3, 5);
    const auto base = sd2::pearson_features(data);
    for (double c : {3.0, -0.5}) {
        auto scaled = data;
        for (auto& t : scaled.transitions) t.a[2] = c * t.a[2] + 1.25;
        const auto f = sd2::pearson_features(scaled);
        CHECK((f.values - base.values).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("pearson: blocks-2x3 features separate the blocks (oracle from raw records)") {
    const auto spec = envs::preset("blocks-2x3");
    const auto data = envs::collect_random(spec, 50, 12);
    const auto f = sd2::pearson_features(data);
    const auto o = oracle::pearson(data);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 12; ++j) CHECK(std::fabs(f(i, j) - o[i][j]) < 1e-12);
    for (std::size_t i = 0; i < 6; ++i) {
        double outside = 0.0, inside = 1.0;
        for (std::size_t a = 0; a < 6; ++a) {
            if (a / 3 == i / 3) inside = std::min(inside, o[i][2 * a + 1]);
            else outside = std::max({outside, o[i][2 * a], o[i][2 * a + 1]});
        }
        CHECK(outside < inside);
    }
}

TEST_CASE("rela: hand-computed fixtures") {
    const auto two = features({{1.0, 0.5}, {1.0, 0.5}});
    CHECK(std::fabs(sd2::rela({0}, {1}, two) - 0.0) < 1e-12);
    const auto three = features({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    CHECK(std::fabs(sd2::rela({0}, {1}, three) - 0.5) < 1e-12);
    const auto same = features({{0.3, 0.4}, {0.3, 0.4}, {0.3, 0.4}, {0.3, 0.4}});
    CHECK(std::fabs(sd2::rela({0}, {1, 2}, same)) < 1e-12);
    CHECK(std::fabs(sd2::rela({0}, {3}, same)) < 1e-12);
}

TEST_CASE("rela: symmetric, rejects identical clusters and non-members") {
    Rng rng(4);
    const auto rows = random_rows(5, 3, rng);
    const auto f = features(rows);
    CHECK(sd2::rela({0, 2}, {1}, f) == doctest::Approx(sd2::rela({1}, {0, 2}, f)).epsilon(1e-15));
    CHECK_THROWS_AS(sd2::rela({1}, {1}, f), InvalidInput);
    const auto ctx = sd2::Partition::from_groups({{0, 2}, {1}, {3, 4}}, 5);
    CHECK_NOTHROW(sd2::rela({0, 2}, {3, 4}, ctx, f));
    CHECK_THROWS_AS(sd2::rela({0}, {3, 4}, ctx, f), InvalidInput);
}

TEST_CASE("cluster_similarity: zero rows have cosine 0, even with themselves") {
    const auto f = features({{0.0, 0.0}, {1.0, 1.0}});
    CHECK(sd2::cluster_similarity({0}, {0}, f) == 0.0);
    CHECK(sd2::cluster_similarity({0}, {1}, f) == 0.0);
    CHECK(sd2::cluster_similarity({1}, {1}, f) == doctest::Approx(1.0));
}

TEST_CASE("sd2_cluster: single dimension") {
    const auto r = sd2::sd2_cluster(features({{0.2, 0.9}}), 0.0);
    CHECK(r.partition.to_string() == "{{1}}");
    CHECK(r.trace.empty());
}

TEST_CASE("sd2_cluster: two pairs of identical rows") {
    const oracle::Rows rows{{1, 0}, {1, 0}, {0, 1}, {0, 1}};
    const auto r = sd2::sd2_cluster(features(rows), 0.0);
    CHECK(r.partition.to_string() == "{{1,2},{3,4}}");
    REQUIRE(r.trace.size() == 3);
    CHECK(r.trace[0].merged);
    CHECK(r.trace[0].rela > 0.0);
    CHECK(r.trace[1].merged);
    CHECK(!r.trace[2].merged);
    CHECK(r.trace[2].rela <= 0.0);
    std::vector<oracle::Group> groups;
    const auto o = oracle::cluster_trace(rows, 0.0, &groups);
    CHECK(groups == std::vector<oracle::Group>{{0, 1}, {2, 3}});
}

TEST_CASE("sd2_cluster: identical singletons covering the space do not merge at eta 0") {
    const auto r = sd2::sd2_cluster(features({{0.5, 0.5}, {0.5, 0.5}}), 0.0);
    CHECK(r.partition.size() == 2);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].rela == 0.0);
    CHECK(!r.trace[0].merged);
}

TEST_CASE("sd2_cluster: extreme thresholds") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto rows = random_rows(5, 4, rng);
        const auto f = features(rows);
        CHECK(sd2::sd2_cluster(f, 1e9).partition == sd2::complete_decomposition(5));
        CHECK(sd2::sd2_cluster(f, -1e9).partition == sd2::single_group(5));
    }
}

TEST_CASE("sd2_cluster: trace matches the per-step argmax oracle") {
    Rng rng(99);
    std::uniform_real_distribution<double> eta_draw(-0.3, 0.3);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t m = 2 + static_cast<std::size_t>(trial % 5);
        const auto rows = random_rows(m, 4, rng);
        const double eta = eta_draw(rng);
        const auto got = sd2::sd2_cluster(features(rows), eta);
        const auto want = oracle::cluster_trace(rows, eta);
        REQUIRE(got.trace.size() == want.size());
        for (std::size_t s = 0; s < want.size(); ++s) {
            CHECK(got.trace[s].first == want[s].first);
            CHECK(got.trace[s].second == want[s].second);
            CHECK(std::fabs(got.trace[s].rela - want[s].rela) < 1e-12);
            CHECK(got.trace[s].merged == want[s].merged);
        }
    }
}

TEST_CASE("sd2_cluster: ties resolve to the smallest pair") {
    // Every row identical: every Rela is the same, so the first merge must be {1},{2}.
    const auto r = sd2::sd2_cluster(features({{1, 1}, {1, 1}, {1, 1}, {1, 1}}), -1.0);
    CHECK(r.trace[0].first == sd2::Group{0});
    CHECK(r.trace[0].second == sd2::Group{1});
}

TEST_CASE("partitions: complete decomposition and single group") {
    CHECK(sd2::complete_decomposition(3).to_string() == "{{1},{2},{3}}");
    CHECK(sd2::complete_decomposition(1).to_string() == "{{1}}");
    CHECK(sd2::complete_decomposition(6).size() == 6);
    CHECK(sd2::single_group(4).to_string() == "{{1,2,3,4}}");
}

TEST_CASE("partitions: canonical form") {
    const auto p = sd2::Partition::from_groups({{5, 3}, {1, 0, 2}, {4}}, 6);
    CHECK(p.to_string() == "{{1,2,3},{4,6},{5}}");
    CHECK(p.to_json() == nlohmann::json::parse("[[1,2,3],[4,6],[5]]"));
}

TEST_CASE("prior partition: valid file and validation errors") {
    const auto p = sd2::parse_prior_partition("[[1,2,3],[4,5,6]]", 6);
    CHECK(p.to_string() == "{{1,2,3},{4,5,6}}");
    try {
        sd2::parse_prior_partition("[[1,2],[2,3]]", 3);
        FAIL("expected overlap");
    } catch (const sd2::PartitionError& e) {
        CHECK(e.kind() == sd2::PartitionError::Kind::overlap);
        CHECK(e.index() == 2);
    }
    try {
        sd2::parse_prior_partition("[[1],[3]]", 3);
        FAIL("expected gap");
    } catch (const sd2::PartitionError& e) {
        CHECK(e.kind() == sd2::PartitionError::Kind::gap);
        CHECK(e.index() == 2);
    }
    try {
        sd2::parse_prior_partition("[[1,2],[3,7]]", 3);
        FAIL("expected out of range");
    } catch (const sd2::PartitionError& e) {
        CHECK(e.kind() == sd2::PartitionError::Kind::out_of_range);
        CHECK(e.index() == 7);
    }
    CHECK_THROWS_AS(sd2::parse_prior_partition("{\"a\":1}", 3), InvalidInput);
}

TEST_CASE("random_partition: degenerate cases, validation and recorded fixture") {
    CHECK(sd2::random_partition(3, 3, 5) == sd2::complete_decomposition(3));
    CHECK(sd2::random_partition(6, 1, 5) == sd2::single_group(6));
    CHECK_THROWS_AS(sd2::random_partition(3, 4, 5), InvalidInput);
    CHECK_THROWS_AS(sd2::random_partition(3, 0, 5), InvalidInput);
    const auto doc = nlohmann::json::parse(read_text_file(ED2_FIXTURES "/random_partition.json"));
    const auto p = sd2::random_partition(doc["m"], doc["k"], doc["seed"]);
    CHECK(p.to_json() == doc["partition"]);
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto q = sd2::random_partition(7, 3, s);
        CHECK(q.size() == 3);
        CHECK(q == sd2::random_partition(7, 3, s));
    }
}

TEST_CASE("sd2_cluster: output is always a valid partition") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 1 + static_cast<std::size_t>(trial % 7);
        const auto r = sd2::sd2_cluster(features(random_rows(m, 3, rng)), 0.0);
        std::vector<oracle::Group> groups(r.partition.groups().begin(), r.partition.groups().end());
        CHECK_NOTHROW(sd2::Partition::from_groups(groups, m));
    }
}

TEST_CASE("thresholds: default and reference values") {
    CHECK(sd2::kDefaultEta == 0.0);
    double lowest = 0.0;
    for (const auto& r : sd2::kReferenceEtas) lowest = std::min(lowest, r.eta);
    CHECK(lowest == -0.3);
    CHECK(std::size(sd2::kReferenceEtas) == 10);
}
