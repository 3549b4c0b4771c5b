// Minibatch Adam training with the squared-relative-residual objective and
// per-iteration metric logging. Works for any model exposing
// forward(inputs, tape*), backward(tape, out_grad), parameters().
#pragma once

#include "dataset.hpp"
#include "optimizer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

namespace h2nn {

struct TrainConfig {
    AdamConfig adam;          // lr 0.0025, betas (0.9, 0.999), eps 1e-5
    int iterations = 2000;
    int batch_size = 32;
    int zeta = 3;             // layers per block-sparse net (model build time)
    std::uint64_t seed = 0;
    int train_share = 2, val_share = 1;
    // per-iteration metrics are averaged over at most this many samples of
    // each part (0 = no cap); final evaluation should use the full set
    int metric_subset = 128;

    void validate() const {
        if (!(adam.lr >= 0) || !(adam.eps > 0))
            throw std::invalid_argument("TrainConfig: lr must be nonnegative and eps positive");
        if (adam.beta1 < 0 || adam.beta1 >= 1 || adam.beta2 < 0 || adam.beta2 >= 1)
            throw std::invalid_argument("TrainConfig: betas must lie in [0, 1)");
        if (iterations < 1 || batch_size < 1 || zeta < 1)
            throw std::invalid_argument("TrainConfig: iterations, batch size, and zeta must be positive");
        if (train_share < 1 || val_share < 1)
            throw std::invalid_argument("TrainConfig: split shares must be positive");
        if (metric_subset < 0)
            throw std::invalid_argument("TrainConfig: metric subset cap cannot be negative");
    }
};

struct MetricsRow {
    int iteration = 0;         // 1-based
    double train_loss = 0;     // minibatch mean of squared relative residuals
    double train_residual = 0; // mean |u - g| / |u| over the train subset
    double val_residual = 0;   // same over the validation subset
    double seconds = 0;        // wall time of the iteration (kept out of deterministic logs)
};

struct LossResult {
    double value = 0;
    Eigen::MatrixXd grad; // d value / d prediction
};

// mean over columns of |u_s - g_s|^2 / |u_s|^2
inline LossResult squared_relative_residual(const Eigen::MatrixXd& target,
                                            const Eigen::MatrixXd& prediction) {
    if (target.rows() != prediction.rows() || target.cols() != prediction.cols())
        throw std::invalid_argument("squared_relative_residual: target and prediction shapes differ");
    if (target.cols() == 0)
        throw std::invalid_argument("squared_relative_residual: empty batch");
    LossResult out;
    out.grad.resize(target.rows(), target.cols());
    const double inv_batch = 1.0 / double(target.cols());
    for (Eigen::Index s = 0; s < target.cols(); ++s) {
        const double u2 = target.col(s).squaredNorm();
        if (u2 == 0.0)
            throw std::invalid_argument("squared_relative_residual: target " + std::to_string(s) +
                                        " has zero norm; relative residual is undefined");
        out.value += (target.col(s) - prediction.col(s)).squaredNorm() / u2 * inv_batch;
        out.grad.col(s) = 2.0 * inv_batch / u2 * (prediction.col(s) - target.col(s));
    }
    return out;
}

// Ratio of mean target norm to mean input norm; the canonical value for the
// models' fixed output scale, so an operator's absolute magnitude (e.g. the
// 1/n^5 factor of the custom kernel) doesn't have to be crossed by gradient
// descent from a unit-scale initialization.
inline double target_scale(const Dataset& part) {
    if (part.sample_count() == 0)
        throw std::invalid_argument("target_scale: empty dataset part");
    double un = 0, qn = 0;
    for (int s = 0; s < part.sample_count(); ++s) {
        un += part.targets.col(s).norm();
        qn += part.inputs.col(s).norm();
    }
    if (!(un > 0) || !(qn > 0))
        throw std::invalid_argument("target_scale: data has zero-norm inputs or targets");
    return un / qn;
}

// mean over samples of |u - g| / |u| (the reported, non-squared error);
// cap > 0 restricts to the leading cap samples
template <class Model>
double mean_relative_residual(const Model& model, const Dataset& part, int cap = 0) {
    int count = part.sample_count();
    if (count == 0)
        throw std::invalid_argument("mean_relative_residual: empty dataset part");
    if (cap > 0)
        count = std::min(count, cap);
    double sum = 0;
    constexpr int chunk = 256;
    for (int s0 = 0; s0 < count; s0 += chunk) {
        const int b = std::min(chunk, count - s0);
        Eigen::MatrixXd g = model.forward(part.inputs.middleCols(s0, b));
        for (int s = 0; s < b; ++s) {
            const double un = part.targets.col(s0 + s).norm();
            if (un == 0.0)
                throw std::invalid_argument("mean_relative_residual: target " + std::to_string(s0 + s) +
                                            " has zero norm");
            sum += (part.targets.col(s0 + s) - g.col(s)).norm() / un;
        }
    }
    return sum / count;
}

// Fixed-size shuffled minibatches: the index pool is reshuffled whenever
// fewer than a full batch remains, so every iteration costs the same and the
// schedule depends only on the seed.
template <class Model>
std::vector<MetricsRow> train(Model& model, const Dataset& train_part, const Dataset& val_part,
                              const TrainConfig& cfg) {
    cfg.validate();
    if (train_part.sample_count() < 1 || val_part.sample_count() < 1)
        throw std::invalid_argument("train: both dataset parts must be nonempty");
    const int n = train_part.n;
    const int batch = std::min(cfg.batch_size, train_part.sample_count());

    std::vector<Eigen::MatrixXd*> params = model.parameters();
    AdamState adam(params, cfg.adam);
    Rng rng(cfg.seed);
    std::vector<int> pool(train_part.sample_count());
    std::iota(pool.begin(), pool.end(), 0);
    std::size_t cursor = pool.size(); // force an initial shuffle

    std::vector<MetricsRow> log;
    log.reserve(cfg.iterations);
    Eigen::MatrixXd q(n, batch), u(n, batch);
    for (int it = 1; it <= cfg.iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        if (cursor + batch > pool.size()) {
            shuffle(pool, rng);
            cursor = 0;
        }
        for (int b = 0; b < batch; ++b) {
            q.col(b) = train_part.inputs.col(pool[cursor + b]);
            u.col(b) = train_part.targets.col(pool[cursor + b]);
        }
        cursor += batch;

        typename Model::Tape tape;
        Eigen::MatrixXd g = model.forward(q, &tape);
        LossResult loss = squared_relative_residual(u, g);
        if (!std::isfinite(loss.value))
            throw std::runtime_error("train: loss became non-finite at iteration " +
                                     std::to_string(it) + " (diverged; reduce the learning rate)");
        std::vector<Eigen::MatrixXd> grads = model.backward(tape, loss.grad);
        adam.step(params, grads);

        MetricsRow row;
        row.iteration = it;
        row.train_loss = loss.value;
        row.train_residual = mean_relative_residual(model, train_part, cfg.metric_subset);
        row.val_residual = mean_relative_residual(model, val_part, cfg.metric_subset);
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.push_back(row);
    }
    return log;
}

} // namespace h2nn
