#include "ed2/d2p/train.hpp"

#include "ed2/common/errors.hpp"

#include <cmath>

namespace ed2::d2p {

using nn::Matrix;
using nn::Tape;
using nn::Var;

SequenceBatch make_batch(std::span<const envs::Transition* const> rows) {
    SequenceBatch b;
    if (rows.empty()) return b;
    const auto n = static_cast<Eigen::Index>(rows[0]->s.size());
    const auto m = static_cast<Eigen::Index>(rows[0]->a.size());
    const auto count = static_cast<Eigen::Index>(rows.size());
    Matrix s(count, n), a(count, m), target(count, n + 1);
    for (Eigen::Index k = 0; k < count; ++k) {
        const auto& tr = *rows[static_cast<std::size_t>(k)];
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            s(k, j) = tr.s[jj];
            target(k, j) = tr.s_next[jj] - tr.s[jj];
        }
        for (Eigen::Index i = 0; i < m; ++i) a(k, i) = tr.a[static_cast<std::size_t>(i)];
        target(k, n) = tr.r;
    }
    b.s.push_back(std::move(s));
    b.a.push_back(std::move(a));
    b.target.push_back(std::move(target));
    return b;
}

namespace {

Matrix standardized_target(const Normalizer& z, const Matrix& target) {
    if (z.identity()) return target;
    Matrix out(target.rows(), target.cols());
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
        for (Eigen::Index j = 0; j < target.cols(); ++j) {
            const auto jj = static_cast<std::size_t>(j);
            out(i, j) = (target(i, j) - z.target_mean[jj]) * (1.0 / z.target_scale[jj]);
        }
    }
    return out;
}

}  // namespace

Var sequence_loss(const D2PModel& model, Tape& tape, const SequenceBatch& batch) {
    if (batch.s.empty() || batch.s.size() != batch.a.size() || batch.s.size() != batch.target.size()) {
        throw InvalidInput("sequence_loss: malformed batch");
    }
    std::optional<Var> h;
    if (model.recurrent()) {
        h = tape.constant(Matrix::Zero(batch.s[0].rows(), static_cast<Eigen::Index>(model.config().latent_width)));
    }
    std::vector<Var> losses;
    for (std::size_t t = 0; t < batch.s.size(); ++t) {
        Var s = tape.constant(batch.s[t]);
        Var a = tape.constant(batch.a[t]);
        GraphOutput g = model.graph(tape, s, a, h);
        losses.push_back(tape.mse(g.standardized, standardized_target(model.normalizer(), batch.target[t])));
        if (model.recurrent()) h = g.h;
    }
    return tape.mean(losses);
}

double batch_loss(const D2PModel& model, const SequenceBatch& batch) {
    Tape tape(&model.params(), false);
    return tape.value(sequence_loss(model, tape, batch))(0, 0);
}

nn::Gradients batch_gradients(const D2PModel& model, const SequenceBatch& batch) {
    Tape tape(&model.params(), true);
    Var loss = sequence_loss(model, tape, batch);
    tape.backward(loss);
    return tape.param_gradients();
}

std::vector<std::size_t> sequence_starts(std::span<const envs::Transition> data, std::size_t len) {
    std::vector<std::size_t> starts;
    if (len == 0 || data.size() < len) return starts;
    std::size_t run = 1;  // length of the contiguous stretch ending at k
    for (std::size_t k = 0; k < data.size(); ++k) {
        if (k > 0) {
            const auto& p = data[k - 1];
            const auto& c = data[k];
            run = (c.episode_id == p.episode_id && c.t == p.t + 1) ? run + 1 : 1;
        }
        if (run >= len) starts.push_back(k + 1 - len);
    }
    return starts;
}

Trainer::Trainer(D2PModel& model, TrainHyper hyper)
    : model_(model),
      hyper_(hyper),
      adam_(nn::AdamState::init(model.params(), hyper.lr)),
      rng_(make_rng(hyper.seed, "shuffle")) {
    if (hyper_.batch == 0) throw InvalidInput("train: batch size must be >= 1");
    if (!(hyper_.lr_end_fraction > 0.0 && hyper_.lr_end_fraction <= 1.0)) {
        throw InvalidInput("train: lr_end_fraction must be in (0, 1]");
    }
    if (model_.recurrent() && hyper_.seq_len == 0) throw InvalidInput("train: seq_len must be >= 1");
}

std::vector<double> Trainer::train(std::span<const envs::Transition> data, std::size_t steps) {
    if (data.empty()) throw InvalidInput("train: empty dataset");
    if (hyper_.normalize && steps_done_ == 0 && model_.normalizer().identity()) {
        model_.set_normalizer(fit_normalizer(data));
    }
    std::vector<double> trace;
    trace.reserve(steps);
    const bool rec = model_.recurrent();
    std::vector<std::size_t> starts;
    if (rec) {
        starts = sequence_starts(data, hyper_.seq_len);
        if (starts.empty()) {
            throw InvalidInput("train: no episode stretch of length seq_len=" + std::to_string(hyper_.seq_len));
        }
    }
    const std::size_t pool = rec ? starts.size() : data.size();
    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    const std::size_t len = rec ? hyper_.seq_len : 1;
    std::vector<std::size_t> chosen(hyper_.batch);
    std::vector<const envs::Transition*> rows(hyper_.batch);

    for (std::size_t step = 0; step < steps; ++step) {
        const double progress = steps > 1 ? static_cast<double>(step) / static_cast<double>(steps - 1) : 0.0;
        adam_.learning_rate = hyper_.lr * std::pow(hyper_.lr_end_fraction, progress);
        for (auto& c : chosen) c = rec ? starts[pick(rng_)] : pick(rng_);
        SequenceBatch batch;
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t b = 0; b < hyper_.batch; ++b) rows[b] = &data[chosen[b] + t];
            SequenceBatch one = make_batch(rows);
            batch.s.push_back(std::move(one.s[0]));
            batch.a.push_back(std::move(one.a[0]));
            batch.target.push_back(std::move(one.target[0]));
        }
        Tape tape(&model_.params(), true);
        Var loss = sequence_loss(model_, tape, batch);
        const double value = tape.value(loss)(0, 0);
        if (!std::isfinite(value)) throw NumericalError(steps_done_, "train: non-finite loss");
        tape.backward(loss);
        nn::adam_step(model_.params(), tape.param_gradients(), adam_);
        trace.push_back(value);
        ++steps_done_;
    }
    return trace;
}

TrainResult train_model(D2PModel model, const envs::Dataset& dataset, const TrainHyper& hyper) {
    if (dataset.empty()) throw InvalidInput("train_model: empty dataset");
    std::vector<double> trace;
    {
        Trainer trainer(model, hyper);
        trace = trainer.train(dataset.transitions, hyper.steps);
    }
    return {std::move(model), std::move(trace)};
}

}  // namespace ed2::d2p
