#include "ed2/bench/bench.hpp"
#include "ed2/common/errors.hpp"
#include "ed2/common/io.hpp"
#include "ed2/common/rng.hpp"
#include "ed2/d2p/model.hpp"
#include "ed2/d2p/train.hpp"
#include "ed2/d2p/world_model.hpp"
#include "ed2/envs/dataset.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace ed2;
using d2p::D2PModel;
using d2p::D2PModelConfig;
using nn::Matrix;

namespace {

D2PModelConfig small(D2PModelConfig c, std::size_t h = 4, std::size_t kh = 5, std::size_t dh = 3) {
    c.latent_width = h;
    c.kernel_hidden = kh;
    c.decoder_hidden = dh;
    return c;
}

std::vector<double> draw(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

// Copies tensors by position from `from` into a model whose layout has the same shapes.
nn::ParamSet copy_params(const nn::ParamSet& layout, const nn::ParamSet& from, std::size_t from_offset = 0) {
    nn::ParamSet out = layout;
    for (std::size_t i = 0; i < out.size(); ++i) out[i].values = from[from_offset + i].values;
    return out;
}

d2p::Normalizer some_normalizer(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(0.5, 2.0), c(-0.5, 0.5);
    d2p::Normalizer z;
    for (std::size_t j = 0; j < n; ++j) {
        z.state_mean.push_back(c(rng));
        z.state_scale.push_back(u(rng));
    }
    for (std::size_t j = 0; j <= n; ++j) {
        z.target_mean.push_back(c(rng));
        z.target_scale.push_back(u(rng));
    }
    return z;
}

}  // namespace

TEST_CASE("split_action: projections") {
    const auto p = sd2::Partition::from_groups({{0, 2}, {1}}, 3);
    const std::vector<double> a{10, 20, 30};
    CHECK(d2p::split_action(a, p) == std::vector<std::vector<double>>{{10, 30}, {20}});
    CHECK(d2p::split_action(a, sd2::complete_decomposition(3)) == std::vector<std::vector<double>>{{10}, {20}, {30}});
    CHECK(d2p::split_action(a, sd2::single_group(3)) == std::vector<std::vector<double>>{a});
}

TEST_CASE("split_action: concatenation inverts the projection") {
    Rng rng(1);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = sd2::random_partition(7, 1 + seed % 7, seed);
        const auto a = draw(7, rng);
        const auto parts = d2p::split_action(a, p);
        std::vector<double> back(7);
        for (std::size_t g = 0; g < p.size(); ++g)
            for (std::size_t k = 0; k < p[g].size(); ++k) back[p[g][k]] = parts[g][k];
        CHECK(back == a);
    }
}

TEST_CASE("config: kernel counts, labels and parameter matching") {
    const auto p = sd2::Partition::from_groups({{0, 1, 2}, {3, 4, 5}}, 6);
    const auto d = D2PModelConfig::decomposed(p, 12);
    CHECK(d.kernel_count() == 2);
    CHECK(d.kernel_inputs(1) == std::vector<std::size_t>{3, 4, 5});
    CHECK(d.label() == "decomposed:{1,2,3},{4,5,6}");
    CHECK(D2PModelConfig::ensemble(12, 6, 3).kernel_inputs(2).size() == 6);
    for (auto kind : {d2p::KernelKind::nonrecurrent, d2p::KernelKind::recurrent}) {
        auto base = small(d, 16, 16, 16);
        base.kernel_kind = kind;
        const std::size_t target = D2PModel(base, 0).parameter_count();
        CHECK(base.parameter_count() == target);
        for (auto other : {D2PModelConfig::monolithic(12, 6), D2PModelConfig::ensemble(12, 6, 2)}) {
            auto c = small(other, 16, 16, 16);
            c.kernel_kind = kind;
            const auto matched = d2p::match_parameter_count(c, target);
            const double rel = std::fabs(static_cast<double>(matched.parameter_count()) - static_cast<double>(target)) /
                               static_cast<double>(target);
            CHECK(rel <= 0.05);
        }
    }
    auto bad = d;
    bad.groups = {{0, 1}, {1, 2, 3, 4, 5}};
    CHECK_THROWS_AS(bad.validate(), sd2::PartitionError);
}

TEST_CASE("forward: single group equals monolithic with the same parameters") {
    Rng rng(2);
    for (auto kind : {d2p::KernelKind::nonrecurrent, d2p::KernelKind::recurrent}) {
        auto dc = small(D2PModelConfig::decomposed(sd2::single_group(3), 6));
        auto mc = small(D2PModelConfig::monolithic(6, 3));
        dc.kernel_kind = mc.kernel_kind = kind;
        const D2PModel dm(dc, 5);
        const D2PModel mm(mc, copy_params(D2PModel(mc, 0).params(), dm.params()));
        const auto s = draw(6, rng), a = draw(3, rng), h = draw(4, rng);
        d2p::StepOutput x, y;
        if (kind == d2p::KernelKind::recurrent) {
            x = d2p::d2p_forward_rec(dm, h, s, a);
            y = d2p::monolithic_forward(mm, s, a, h);
        } else {
            x = d2p::d2p_forward_nonrec(dm, s, a);
            y = d2p::monolithic_forward(mm, s, a);
        }
        CHECK(x.s_pred == y.s_pred);
        CHECK(x.r_pred == y.r_pred);
        CHECK(x.latent.h == y.latent.h);
    }
}

TEST_CASE("forward: identical kernels on equal inputs give the mean identity") {
    auto c = small(D2PModelConfig::decomposed(sd2::complete_decomposition(2), 4));
    D2PModel m(c, 3);
    const std::size_t per = m.kernel_param_tensors();
    for (std::size_t i = 0; i < per; ++i) m.params()[per + i].values = m.params()[i].values;
    const std::vector<double> s{0.1, 0.2, -0.3, 0.4}, a{0.6, 0.6};
    const auto o = d2p::d2p_forward_nonrec(m, s, a);
    CHECK(o.latent.per_kernel[0] == o.latent.per_kernel[1]);
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(o.latent.h(0, j) == o.latent.per_kernel[0](0, j));
}

TEST_CASE("forward: zero decoder gives s + bias and the no-change fixed point") {
    auto c = small(D2PModelConfig::decomposed(sd2::Partition::from_groups({{0}, {1, 2}}, 3), 6));
    D2PModel m(c, 4);
    const auto w = m.params().find("decoder.W1").value();
    const auto b = m.params().find("decoder.b1").value();
    for (double& x : m.params()[w].values) x = 0.0;
    const std::vector<double> bias{0.1, -0.2, 0.3, 0.0, 0.5, -0.6};
    m.params()[b].values = bias;
    const std::vector<double> s{1, 2, 3, 4, 5, 6}, a{0.2, -0.1, 0.4};
    auto o = d2p::d2p_forward_nonrec(m, s, a);
    for (std::size_t j = 0; j < 6; ++j) CHECK(o.s_pred[j] == s[j] + bias[j]);
    for (double& x : m.params()[b].values) x = 0.0;
    o = d2p::d2p_forward_nonrec(m, s, a);
    CHECK(o.s_pred == s);
}

TEST_CASE("forward: recurrent kernels with zero parameters keep h at zero") {
    auto c = small(D2PModelConfig::decomposed(sd2::Partition::from_groups({{0, 1}, {2}}, 3), 6));
    c.kernel_kind = d2p::KernelKind::recurrent;
    D2PModel m(c, 6);
    const std::size_t kernel_tensors = m.kernel_param_tensors() * m.kernel_count();
    for (std::size_t i = 0; i < kernel_tensors; ++i)
        for (double& x : m.params()[i].values) x = 0.0;
    const std::vector<double> h0(4, 0.0), s{0.5, 0.1, -0.2, 0.3, 0.9, -0.7}, a{1.0, -1.0, 0.5};
    const auto o = d2p::d2p_forward_rec(m, h0, s, a);
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(o.latent.h(0, j) == 0.0);
}

TEST_CASE("forward: matches the scalar oracle, with and without normalization") {
    Rng rng(7);
    for (int trial = 0; trial < 12; ++trial) {
        const auto kind = trial % 2 ? d2p::KernelKind::recurrent : d2p::KernelKind::nonrecurrent;
        D2PModelConfig c;
        switch (trial % 3) {
            case 0: c = D2PModelConfig::decomposed(sd2::random_partition(4, 2, static_cast<std::uint64_t>(trial)), 8); break;
            case 1: c = D2PModelConfig::ensemble(8, 4, 3); break;
            default: c = D2PModelConfig::monolithic(8, 4); break;
        }
        c = small(c);
        c.kernel_kind = kind;
        c.predict_delta = trial % 4 != 3;
        D2PModel m(c, static_cast<std::uint64_t>(100 + trial));
        if (trial % 2 == 0) m.set_normalizer(some_normalizer(8, rng));
        // Two consecutive steps; recurrent models carry h forward.
        std::vector<double> h(4, 0.0);
        for (int t = 0; t < 2; ++t) {
            const auto s = draw(8, rng), a = draw(4, rng);
            Matrix hm = nn::row_matrix(h);
            const auto got = m.forward(nn::row_matrix(s), nn::row_matrix(a), &hm);
            const auto want = oracle::model_step(m, s, a, h);
            for (std::size_t j = 0; j < 8; ++j) CHECK(got.s_pred(0, j) == doctest::Approx(want.s_pred[j]).epsilon(1e-12));
            CHECK(got.r_pred(0, 0) == doctest::Approx(want.r).epsilon(1e-12));
            for (std::size_t j = 0; j < 4; ++j) CHECK(got.latent.h(0, j) == doctest::Approx(want.h[j]).epsilon(1e-12));
            if (kind == d2p::KernelKind::recurrent) h = want.h;
        }
    }
}

TEST_CASE("forward: recorded golden outputs") {
    const auto doc = nlohmann::json::parse(read_text_file(ED2_FIXTURES "/model_golden.json"));
    const auto s = doc["s"].get<std::vector<double>>();
    const auto a = doc["a"].get<std::vector<double>>();
    for (const char* key : {"kernel_ensemble_k3", "monolithic"}) {
        const auto& g = doc[key];
        D2PModelConfig c = std::string(key) == "monolithic" ? D2PModelConfig::monolithic(6, 3) : D2PModelConfig::ensemble(6, 3, 3);
        c = small(c, g["latent"], g["kernel_hidden"], g["decoder_hidden"]);
        const D2PModel m(c, g["seed"].get<std::uint64_t>());
        const auto o = c.variant == d2p::ModelVariant::monolithic ? d2p::monolithic_forward(m, s, a)
                                                                   : d2p::kernel_ensemble_forward(m, s, a);
        const auto want = g["s_pred"].get<std::vector<double>>();
        for (std::size_t j = 0; j < 6; ++j) CHECK(o.s_pred[j] == doctest::Approx(want[j]).epsilon(1e-13));
        CHECK(o.r_pred == doctest::Approx(g["r_pred"].get<double>()).epsilon(1e-13));
    }
}

TEST_CASE("forward: identical ensemble kernels equal the monolithic model") {
    for (std::size_t k : {1, 3}) {
        auto ec = small(D2PModelConfig::ensemble(6, 3, k));
        auto mc = small(D2PModelConfig::monolithic(6, 3));
        D2PModel mono(mc, 9);
        D2PModel ens(ec, 10);
        const std::size_t per = mono.kernel_param_tensors();
        for (std::size_t q = 0; q < k; ++q)
            for (std::size_t i = 0; i < per; ++i) ens.params()[q * per + i].values = mono.params()[i].values;
        for (std::size_t i = per; i < mono.params().size(); ++i) ens.params()[(k - 1) * per + i].values = mono.params()[i].values;
        const std::vector<double> s{0.3, -0.1, 0.2, 0.7, -0.5, 0.0}, a{0.4, 0.9, -0.8};
        const auto x = d2p::kernel_ensemble_forward(ens, s, a);
        const auto y = d2p::monolithic_forward(mono, s, a);
        for (std::size_t j = 0; j < 6; ++j) CHECK(x.s_pred[j] == doctest::Approx(y.s_pred[j]).epsilon(1e-15));
        CHECK(x.r_pred == doctest::Approx(y.r_pred).epsilon(1e-15));
    }
}

TEST_CASE("forward: monolithic zero network predicts biases only") {
    auto c = small(D2PModelConfig::monolithic(4, 2));
    D2PModel m(c, 11);
    for (std::size_t i = 0; i < m.params().size(); ++i)
        for (double& x : m.params()[i].values) x = 0.0;
    m.params()[m.params().find("decoder.b1").value()].values = {0.5, -0.5, 0.25, 0.0};
    m.params()[m.params().find("reward.b0").value()].values = {-1.5};
    const std::vector<double> s{1, 1, 1, 1}, a{0.3, -0.3};
    const auto o = d2p::monolithic_forward(m, s, a);
    CHECK(o.s_pred == std::vector<double>{1.5, 0.5, 1.25, 1.0});
    CHECK(o.r_pred == -1.5);
}

TEST_CASE("forward: permuting groups and kernels is bit-identical") {
    Rng rng(12);
    for (auto kind : {d2p::KernelKind::nonrecurrent, d2p::KernelKind::recurrent}) {
        auto c = small(D2PModelConfig::decomposed(sd2::Partition::from_groups({{0, 3}, {1}, {2, 4}}, 5), 10));
        c.kernel_kind = kind;
        const D2PModel m(c, 13);
        const std::vector<std::size_t> perm{2, 0, 1};
        auto pc = c;
        for (std::size_t q = 0; q < 3; ++q) pc.groups[q] = c.groups[perm[q]];
        nn::ParamSet pp = D2PModel(pc, 0).params();
        const std::size_t per = m.kernel_param_tensors();
        for (std::size_t q = 0; q < 3; ++q)
            for (std::size_t i = 0; i < per; ++i) pp[q * per + i].values = m.params()[perm[q] * per + i].values;
        for (std::size_t i = 3 * per; i < pp.size(); ++i) pp[i].values = m.params()[i].values;
        const D2PModel pm(pc, pp);
        for (int trial = 0; trial < 10; ++trial) {
            const auto s = draw(10, rng), a = draw(5, rng), h = draw(4, rng);
            Matrix hm = nn::row_matrix(h);
            const auto x = m.forward(nn::row_matrix(s), nn::row_matrix(a), &hm);
            const auto y = pm.forward(nn::row_matrix(s), nn::row_matrix(a), &hm);
            CHECK(x.s_pred == y.s_pred);
            CHECK(x.r_pred == y.r_pred);
            CHECK(x.latent.h == y.latent.h);
        }
    }
}

TEST_CASE("forward: dimension mismatches are rejected") {
    const D2PModel m(small(D2PModelConfig::monolithic(4, 2)), 1);
    CHECK_THROWS_AS(d2p::monolithic_forward(m, std::vector<double>(3, 0.0), std::vector<double>(2, 0.0)), InvalidInput);
    CHECK_THROWS_AS(d2p::monolithic_forward(m, std::vector<double>(4, 0.0), std::vector<double>(3, 0.0)), InvalidInput);
    auto rc = small(D2PModelConfig::monolithic(4, 2));
    rc.kernel_kind = d2p::KernelKind::recurrent;
    const D2PModel r(rc, 1);
    CHECK_THROWS_AS(d2p::monolithic_forward(r, std::vector<double>(4, 0.0), std::vector<double>(2, 0.0), std::vector<double>(3, 0.0)),
                    InvalidInput);
}

TEST_CASE("model gradients agree with finite differences") {
    Rng rng(14);
    for (auto kind : {d2p::KernelKind::nonrecurrent, d2p::KernelKind::recurrent}) {
        auto c = small(D2PModelConfig::decomposed(sd2::Partition::from_groups({{0, 2}, {1}}, 3), 6), 3, 3, 3);
        c.kernel_kind = kind;
        D2PModel m(c, 15);
        m.set_normalizer(some_normalizer(6, rng));
        d2p::SequenceBatch b;
        for (int t = 0; t < (kind == d2p::KernelKind::recurrent ? 4 : 1); ++t) {
            Matrix s(3, 6), a(3, 3), y(3, 7);
            for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = draw(1, rng)[0];
            for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = draw(1, rng)[0];
            for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = draw(1, rng)[0];
            b.s.push_back(s);
            b.a.push_back(a);
            b.target.push_back(y);
        }
        const auto g = d2p::batch_gradients(m, b);
        const auto f = nn::finite_diff_grad(
            [&](const nn::ParamSet& p) {
                D2PModel q = m;
                q.params() = p;
                return d2p::batch_loss(q, b);
            },
            m.params(), 1e-5);
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = 0; j < g[i].size(); ++j)
                CHECK(std::fabs(g[i][j] - f[i][j]) <= 1e-4 * std::max({std::fabs(g[i][j]), std::fabs(f[i][j]), 1e-6}));
    }
}

TEST_CASE("normalizer: fitted statistics and validation") {
    auto spec = envs::preset("blocks-2x3");
    const auto d = envs::collect_random(spec, 2, 3);
    const auto z = d2p::fit_normalizer(d.transitions);
    CHECK_NOTHROW(z.validate(12));
    double mean_r = 0.0;
    for (const auto& t : d.transitions) mean_r += t.r;
    mean_r /= static_cast<double>(d.size());
    CHECK(z.target_mean[12] == doctest::Approx(mean_r).epsilon(1e-12));
    // Velocities start at zero in every episode but vary later, positions always vary.
    for (double x : z.state_scale) CHECK(x > 0.0);
    const auto back = d2p::normalizer_from_json(d2p::normalizer_to_json(z));
    CHECK(back.state_mean == z.state_mean);
    CHECK(back.target_scale == z.target_scale);
    auto bad = z;
    bad.state_scale[0] = 0.0;
    CHECK_THROWS_AS(bad.validate(12), InvalidInput);
}

TEST_CASE("checkpoint round-trip restores config, normalizer and parameters") {
    Rng rng(16);
    auto c = small(D2PModelConfig::decomposed(sd2::Partition::from_groups({{0, 1}, {2}}, 3), 6));
    c.kernel_kind = d2p::KernelKind::recurrent;
    D2PModel m(c, 17);
    m.set_normalizer(some_normalizer(6, rng));
    const auto back = D2PModel::from_checkpoint(nlohmann::json::parse(m.checkpoint().dump()));
    CHECK(back.params() == m.params());
    CHECK(back.config().label() == m.config().label());
    CHECK(back.normalizer().state_mean == m.normalizer().state_mean);
    CHECK(back.checkpoint().dump() == m.checkpoint().dump());
}

TEST_CASE("training: constant dataset is memorized") {
    auto spec = envs::preset("blocks-2x3");
    auto d = envs::collect_random(spec, 1, 1);
    d.transitions.resize(1);
    for (int k = 1; k < 40; ++k) {
        auto t = d.transitions[0];
        t.t = k;
        d.transitions.push_back(t);
    }
    d2p::TrainHyper h;
    h.steps = 500;
    h.lr = 3e-3;
    h.batch = 8;
    const auto r = d2p::train_model(D2PModel(small(D2PModelConfig::monolithic(12, 6), 16, 16, 16), 2), d, h);
    CHECK(r.loss_trace.size() == 500);
    CHECK(r.loss_trace.back() < 1e-4);
}

TEST_CASE("training: zero learning rate leaves parameters untouched") {
    auto spec = envs::preset("blocks-2x3");
    auto d = envs::collect_random(spec, 1, 1);
    d.transitions.resize(1);
    d2p::TrainHyper h;
    h.steps = 20;
    h.lr = 0.0;
    h.batch = 4;
    const D2PModel start(small(D2PModelConfig::decomposed(sd2::Partition::from_groups({{0, 1, 2}, {3, 4, 5}}, 6), 12)), 3);
    const auto r = d2p::train_model(start, d, h);
    CHECK(r.model.params() == start.params());
    for (double x : r.loss_trace) CHECK(x == r.loss_trace.front());
}

TEST_CASE("training: deterministic per seed; divergence reports the step") {
    auto spec = envs::preset("blocks-3x2");
    const auto d = envs::collect_random(spec, 3, 4);
    d2p::TrainHyper h;
    h.steps = 30;
    h.seed = 8;
    const D2PModel start(small(D2PModelConfig::monolithic(12, 6)), 5);
    CHECK(d2p::train_model(start, d, h).loss_trace == d2p::train_model(start, d, h).loss_trace);
    h.lr = 1e200;
    h.normalize = false;
    CHECK_THROWS_AS(d2p::train_model(start, d, h), NumericalError);
}

TEST_CASE("training: recurrent batches need long enough episodes") {
    auto spec = envs::preset("blocks-2x3");
    spec.horizon = 5;
    const auto d = envs::collect_random(spec, 2, 1);
    auto c = small(D2PModelConfig::monolithic(12, 6));
    c.kernel_kind = d2p::KernelKind::recurrent;
    d2p::TrainHyper h;
    h.steps = 2;
    h.seq_len = 8;
    CHECK_THROWS_AS(d2p::train_model(D2PModel(c, 1), d, h), InvalidInput);
    h.seq_len = 4;
    CHECK(d2p::train_model(D2PModel(c, 1), d, h).loss_trace.size() == 2);
    CHECK(d2p::sequence_starts(d.transitions, 4) == std::vector<std::size_t>{0, 1, 5, 6});
}

TEST_CASE("rollout: empty, single-step and non-finite handling") {
    const D2PModel m(small(D2PModelConfig::monolithic(4, 2)), 1);
    const d2p::LearnedModel lm(m, {});
    const std::vector<double> s0{0.1, 0.2, 0.3, 0.4};
    const auto empty = d2p::rollout(lm, s0, {});
    CHECK(empty.states.empty());
    CHECK(empty.rewards.empty());
    const auto one = d2p::rollout(lm, s0, {{0.5, -0.5}});
    const auto f = d2p::monolithic_forward(m, s0, std::vector<double>{0.5, -0.5});
    CHECK(one.states[0] == f.s_pred);
    CHECK(one.rewards[0] == f.r_pred);
    D2PModel blow = m;
    // Finite after one step, overflows on the second.
    blow.params()[blow.params().find("decoder.b1").value()].values = {1e308, 1e308, 1e308, 1e308};
    const d2p::LearnedModel bl(blow, {});
    try {
        d2p::rollout(bl, s0, {{0, 0}, {0, 0}, {0, 0}});
        FAIL("expected a NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.step() == 1);
    }
}

namespace {

// One D2P model trained for 5000 steps on 200 random-policy episodes of blocks-2x3.
const D2PModel& trained_reference() {
    static const D2PModel model = [] {
        const auto spec = envs::preset("blocks-2x3");
        const auto data = envs::collect_random(spec, 200, derive_seed(0, "data"));
        auto c = D2PModelConfig::decomposed(sd2::Partition::from_groups({{0, 1, 2}, {3, 4, 5}}, 6), 12);
        c = small(c, 64, 64, 64);
        auto h = bench::default_bench_hyper();
        h.steps = 5000;
        return d2p::train_model(D2PModel(c, 0), data, h).model;
    }();
    return model;
}

}  // namespace

TEST_CASE("training: held-out one-step error on blocks-2x3 after 5000 steps") {
    const auto spec = envs::preset("blocks-2x3");
    const auto eval = envs::collect_random(spec, 10, derive_seed(1, "data"));
    const d2p::LearnedModel lm(trained_reference(), {});
    double state_err = 0.0, reward_err = 0.0, mean_r = 0.0, var_r = 0.0;
    for (const auto& t : eval.transitions) {
        Matrix sn, r;
        lm.predict(nn::row_matrix(t.s), nn::row_matrix(t.a), nullptr, sn, r);
        for (std::size_t j = 0; j < 12; ++j) state_err += (sn(0, j) - t.s_next[j]) * (sn(0, j) - t.s_next[j]);
        reward_err += (r(0, 0) - t.r) * (r(0, 0) - t.r);
        mean_r += t.r;
    }
    const double n = static_cast<double>(eval.size());
    mean_r /= n;
    for (const auto& t : eval.transitions) var_r += (t.r - mean_r) * (t.r - mean_r);
    // Thresholds from the recorded pilot: state 3.7e-5 per coordinate, reward 2.5% of variance.
    CHECK(state_err / (n * 12) < 1e-3);
    CHECK(reward_err / var_r < 0.10);
}

TEST_CASE("rollout: error grows with the horizon for a trained model") {
    const d2p::LearnedModel lm(trained_reference(), {});
    const auto err = bench::multistep_error(lm, envs::preset("blocks-2x3"), 10, 50, 3);
    REQUIRE(err.size() == 10);
    for (std::size_t t = 1; t < err.size(); ++t) CHECK(err[t] > err[t - 1]);
}
