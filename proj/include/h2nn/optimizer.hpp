// Glorot-uniform initialization and Adam. The epsilon is added to the
// square root of the bias-corrected second moment (not under it), so with
// beta1 = beta2 = 0 a step degenerates to -lr * g / (|g| + eps).
#pragma once

#include "rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace h2nn {

// entries i.i.d. uniform on (-a, a), a = sqrt(6 / (fan_in + fan_out)),
// filled row-major so a seed pins the exact bytes
inline void glorot_uniform_init(Eigen::MatrixXd& w, Rng& rng) {
    if (w.rows() == 0 || w.cols() == 0)
        throw std::invalid_argument("glorot_uniform_init: zero-sized block");
    const double a = std::sqrt(6.0 / double(w.rows() + w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            w(r, c) = rng.uniform(-a, a);
}

struct AdamConfig {
    double lr = 0.0025;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-5;
};

class AdamState {
public:
    AdamState() = default;

    AdamState(const std::vector<Eigen::MatrixXd*>& params, AdamConfig cfg = {}) : cfg_(cfg) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const Eigen::MatrixXd* p : params) {
            m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
            v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        }
    }

    const AdamConfig& config() const { return cfg_; }
    long step_count() const { return t_; }
    std::vector<Eigen::MatrixXd>& first_moments() { return m_; }
    std::vector<Eigen::MatrixXd>& second_moments() { return v_; }
    long& step_counter() { return t_; }

    void step(const std::vector<Eigen::MatrixXd*>& params,
              const std::vector<Eigen::MatrixXd>& grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw std::invalid_argument("AdamState: parameter/gradient count changed (" +
                                        std::to_string(params.size()) + "/" + std::to_string(grads.size()) +
                                        " vs state " + std::to_string(m_.size()) + ")");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (std::size_t k = 0; k < m_.size(); ++k) {
            Eigen::MatrixXd& p = *params[k];
            const Eigen::MatrixXd& g = grads[k];
            if (g.rows() != p.rows() || g.cols() != p.cols() || m_[k].rows() != p.rows())
                throw std::invalid_argument("AdamState: shape mismatch at parameter " + std::to_string(k));
            m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g;
            v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
            p.array() -= cfg_.lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + cfg_.eps);
        }
    }

private:
    AdamConfig cfg_;
    std::vector<Eigen::MatrixXd> m_, v_;
    long t_ = 0;
};

} // namespace h2nn
