#include "ed2/d2p/world_model.hpp"

#include "ed2/common/errors.hpp"

#include <cmath>

namespace ed2::d2p {

using nn::Matrix;

LearnedModel::LearnedModel(D2PModel model, TrainHyper hyper)
    : holder_(std::make_unique<D2PModel>(std::move(model))), model_(*holder_), trainer_(model_, hyper) {}

std::size_t LearnedModel::latent_width() const { return model_.recurrent() ? model_.config().latent_width : 0; }

void LearnedModel::predict(const Matrix& s, const Matrix& a, Matrix* h, Matrix& s_next, Matrix& r) const {
    Prediction p = model_.forward(s, a, model_.recurrent() ? h : nullptr);
    if (model_.recurrent() && h != nullptr) *h = std::move(p.latent.h);
    s_next = std::move(p.s_pred);
    r = std::move(p.r_pred);
}

std::vector<double> LearnedModel::fit(std::span<const envs::Transition> data, std::size_t steps) {
    return trainer_.train(data, steps);
}

OracleModel::OracleModel(envs::BlockEnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

void OracleModel::predict(const Matrix& s, const Matrix& a, Matrix*, Matrix& s_next, Matrix& r) const {
    s_next.resize(s.rows(), s.cols());
    r.resize(s.rows(), 1);
    for (Eigen::Index k = 0; k < s.rows(); ++k) {
        auto step = envs::env_step(spec_, std::span<const double>(s.row(k).data(), static_cast<std::size_t>(s.cols())),
                                   std::span<const double>(a.row(k).data(), static_cast<std::size_t>(a.cols())));
        for (Eigen::Index j = 0; j < s.cols(); ++j) s_next(k, j) = step.next_state[static_cast<std::size_t>(j)];
        r(k, 0) = step.reward;
    }
}

namespace {

double squared_error(const Matrix& s, const Matrix& s_next_true, const Matrix& r_true, const Matrix& s_pred,
                     const Matrix& r_pred) {
    // (pred delta - true delta) == s_pred - s_next_true, but keep the delta form so the
    // arithmetic matches the training target exactly.
    const Matrix d_pred = s_pred - s;
    const Matrix d_true = s_next_true - s;
    return (d_pred - d_true).squaredNorm() + (r_pred - r_true).squaredNorm();
}

void fill(std::span<const envs::Transition> rows, Matrix& s, Matrix& a, Matrix& s2, Matrix& r) {
    const auto count = static_cast<Eigen::Index>(rows.size());
    const auto n = static_cast<Eigen::Index>(rows[0].s.size());
    const auto m = static_cast<Eigen::Index>(rows[0].a.size());
    s.resize(count, n);
    s2.resize(count, n);
    a.resize(count, m);
    r.resize(count, 1);
    for (Eigen::Index k = 0; k < count; ++k) {
        const auto& tr = rows[static_cast<std::size_t>(k)];
        for (Eigen::Index j = 0; j < n; ++j) {
            s(k, j) = tr.s[static_cast<std::size_t>(j)];
            s2(k, j) = tr.s_next[static_cast<std::size_t>(j)];
        }
        for (Eigen::Index i = 0; i < m; ++i) a(k, i) = tr.a[static_cast<std::size_t>(i)];
        r(k, 0) = tr.r;
    }
}

}  // namespace

double one_step_mse(const WorldModel& model, std::span<const envs::Transition> data) {
    if (data.empty()) throw InvalidInput("one_step_mse: empty evaluation set");
    const double outputs = static_cast<double>(model.state_width() + 1);
    Matrix s, a, s2, r, sp, rp;
    if (model.latent_width() == 0) {
        fill(data, s, a, s2, r);
        model.predict(s, a, nullptr, sp, rp);
        return squared_error(s, s2, r, sp, rp) / (static_cast<double>(data.size()) * outputs);
    }
    double total = 0.0;
    std::size_t begin = 0;
    while (begin < data.size()) {
        std::size_t end = begin + 1;
        while (end < data.size() && data[end].episode_id == data[end - 1].episode_id &&
               data[end].t == data[end - 1].t + 1) {
            ++end;
        }
        Matrix h = Matrix::Zero(1, static_cast<Eigen::Index>(model.latent_width()));
        for (std::size_t k = begin; k < end; ++k) {
            fill(data.subspan(k, 1), s, a, s2, r);
            model.predict(s, a, &h, sp, rp);
            total += squared_error(s, s2, r, sp, rp);
        }
        begin = end;
    }
    return total / (static_cast<double>(data.size()) * outputs);
}

RolloutResult rollout(const WorldModel& model, std::span<const double> s0,
                      const std::vector<std::vector<double>>& actions, std::span<const double> h0) {
    if (s0.size() != model.state_width()) throw InvalidInput("rollout: start state has the wrong width");
    RolloutResult out;
    Matrix s = nn::row_matrix(s0);
    Matrix h;
    if (model.latent_width() > 0) {
        h = h0.empty() ? Matrix::Zero(1, static_cast<Eigen::Index>(model.latent_width())) : nn::row_matrix(h0);
        if (static_cast<std::size_t>(h.cols()) != model.latent_width()) {
            throw InvalidInput("rollout: h0 has the wrong width");
        }
    }
    Matrix sp, rp;
    for (std::size_t t = 0; t < actions.size(); ++t) {
        if (actions[t].size() != model.action_width()) {
            throw InvalidInput("rollout: action " + std::to_string(t) + " has the wrong width");
        }
        model.predict(s, nn::row_matrix(actions[t]), model.latent_width() > 0 ? &h : nullptr, sp, rp);
        if (!sp.allFinite() || !rp.allFinite()) throw NumericalError(t, "rollout: non-finite prediction");
        out.states.emplace_back(sp.data(), sp.data() + sp.size());
        out.rewards.push_back(rp(0, 0));
        s = sp;
    }
    return out;
}

}  // namespace ed2::d2p
