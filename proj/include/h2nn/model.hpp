// The hierarchical block-sparse network and the convolutional baseline.
//
// The network computes  w = G0[q] + sum_m U_L..U_m G_m[ V_m..V_L q ] :
// a block-sparse feedforward net G0 on the leaf close template, plus one
// branch per level with a nonempty interaction list. The projection (V) and
// interpolation (U) chains are trainable block-diagonal linear layers shared
// across branches; each G_m is a zeta-layer block-sparse net reusing the
// level's interaction template, ReLU on hidden layers, linear final layer.
#pragma once

#include "h2_matrix.hpp"
#include "layers.hpp"
#include "optimizer.hpp"

#include <cmath>

namespace h2nn {

class H2Network {
public:
    struct Tape {
        std::vector<LayerTape> close;                 // per G0 layer
        std::vector<LayerTape> down;                  // V_l, index level - m_min
        std::vector<LayerTape> up;                    // U_l, index level - m_min
        std::vector<std::vector<LayerTape>> net;      // per level, per G_l layer
        Eigen::Index batch = -1;
    };

    H2Network(H2Skeleton skel, int zeta, Rng& rng) : skel_(std::move(skel)), zeta_(zeta) {
        if (zeta_ < 1)
            throw std::invalid_argument("H2Network: zeta must be at least 1, got " + std::to_string(zeta_));
        skel_.validate();
        m_min_ = skel_.min_active_level();

        for (int t = 0; t < zeta_; ++t)
            close_.emplace_back(skel_.close_template, hidden_or_final(t));
        for (int l = m_min_; l <= skel_.levels; ++l) {
            const int h = skel_.boxes_at(l);
            down_.emplace_back(h, skel_.rank_at(l), skel_.basis_rows(l));
            up_.emplace_back(h, skel_.basis_rows(l), skel_.rank_at(l));
            nets_.emplace_back();
            if (!skel_.interaction[l - 1].empty())
                for (int t = 0; t < zeta_; ++t)
                    nets_.back().emplace_back(skel_.interaction[l - 1], hidden_or_final(t));
        }
        for (Eigen::MatrixXd* w : parameters())
            glorot_uniform_init(*w, rng);
    }

    const H2Skeleton& skeleton() const { return skel_; }
    int zeta() const { return zeta_; }
    int size() const { return skel_.n; }
    int min_level() const { return m_min_; }

    // fixed multiplier on the output, not trained; set it to the data's
    // target scale so Glorot-sized activations start near the right
    // magnitude regardless of the operator's absolute scale
    double output_scale() const { return scale_; }
    void set_output_scale(double s) {
        if (!(s > 0) || !std::isfinite(s))
            throw std::invalid_argument("H2Network: output scale must be positive and finite");
        scale_ = s;
    }

    std::vector<BlockSparseLayer>& close_net() { return close_; }
    BlockDiagLayer& down_layer(int level) { return down_.at(level - m_min_); }
    BlockDiagLayer& up_layer(int level) { return up_.at(level - m_min_); }
    std::vector<BlockSparseLayer>& branch_net(int level) { return nets_.at(level - m_min_); }

    // fixed traversal order shared by initialization, the optimizer, and
    // checkpoints: G0 layers, then per level (ascending from the lowest
    // active one) V blocks, U blocks, G_l layers
    std::vector<Eigen::MatrixXd*> parameters() {
        std::vector<Eigen::MatrixXd*> out;
        for (auto& layer : close_)
            for (auto& w : layer.weights())
                out.push_back(&w);
        for (int k = 0; k < int(down_.size()); ++k) {
            for (auto& w : down_[k].blocks())
                out.push_back(&w);
            for (auto& w : up_[k].blocks())
                out.push_back(&w);
            for (auto& layer : nets_[k])
                for (auto& w : layer.weights())
                    out.push_back(&w);
        }
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t c = 0;
        for (auto& layer : close_)
            for (auto& w : layer.weights())
                c += w.size();
        for (int k = 0; k < int(down_.size()); ++k) {
            for (auto& w : down_[k].blocks())
                c += w.size();
            for (auto& w : up_[k].blocks())
                c += w.size();
            for (auto& layer : nets_[k])
                for (auto& w : layer.weights())
                    c += w.size();
        }
        return c;
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& q, Tape* tape = nullptr) const {
        if (q.rows() != skel_.n)
            throw std::invalid_argument("H2Network: input has " + std::to_string(q.rows()) +
                                        " rows, network expects " + std::to_string(skel_.n));
        const int L = skel_.levels;
        Tape local;
        Tape& tp = tape ? *tape : local;
        tp.close.assign(zeta_, {});
        tp.down.assign(down_.size(), {});
        tp.up.assign(up_.size(), {});
        tp.net.assign(nets_.size(), {});
        tp.batch = q.cols();

        Eigen::MatrixXd w = q;
        for (int t = 0; t < zeta_; ++t)
            w = close_[t].forward(w, &tp.close[t]);

        if (m_min_ > L)
            return scale_ == 1.0 ? w : (scale_ * w).eval();

        std::vector<Eigen::MatrixXd> d(down_.size());
        for (int l = L; l >= m_min_; --l) {
            const Eigen::MatrixXd& src = l == L ? q : d[idx(l + 1)];
            d[idx(l)] = down_[idx(l)].forward(src, &tp.down[idx(l)]);
        }

        Eigen::MatrixXd acc;
        for (int l = m_min_; l <= L; ++l) {
            Eigen::MatrixXd lifted;
            if (l > m_min_)
                lifted = up_[idx(l - 1)].forward(acc, &tp.up[idx(l - 1)]);
            if (!nets_[idx(l)].empty()) {
                Eigen::MatrixXd b = d[idx(l)];
                tp.net[idx(l)].assign(zeta_, {});
                for (int t = 0; t < zeta_; ++t)
                    b = nets_[idx(l)][t].forward(b, &tp.net[idx(l)][t]);
                acc = lifted.size() ? lifted + b : b;
            } else {
                acc = std::move(lifted); // nothing enters at this level
            }
        }
        w += up_[idx(L)].forward(acc, &tp.up[idx(L)]);
        if (scale_ != 1.0)
            w *= scale_;
        return w;
    }

    // gradients aligned with parameters(); optionally also d(loss)/d(input)
    std::vector<Eigen::MatrixXd> backward(const Tape& tp, const Eigen::MatrixXd& out_grad,
                                          Eigen::MatrixXd* input_grad = nullptr) const {
        if (tp.batch != out_grad.cols() || out_grad.rows() != skel_.n)
            throw std::invalid_argument("H2Network: output gradient does not match the taped forward");
        const int L = skel_.levels;

        std::vector<std::vector<Eigen::MatrixXd>> close_g(zeta_);
        std::vector<std::vector<Eigen::MatrixXd>> down_g(down_.size()), up_g(up_.size());
        std::vector<std::vector<std::vector<Eigen::MatrixXd>>> net_g(nets_.size());

        // the tape holds pre-scale activations
        const Eigen::MatrixXd scaled_grad = scale_ * out_grad;
        Eigen::MatrixXd g = scaled_grad;
        for (int t = zeta_ - 1; t >= 0; --t) {
            auto lg = close_[t].backward(tp.close[t], g);
            close_g[t] = std::move(lg.weights);
            g = std::move(lg.input);
        }
        Eigen::MatrixXd q_grad = std::move(g); // via the close branch

        if (m_min_ <= L) {
            // descend the up-chain, peeling off each branch's share
            std::vector<Eigen::MatrixXd> branch_out_g(nets_.size());
            {
                auto ug = up_[idx(L)].backward(tp.up[idx(L)], scaled_grad);
                up_g[idx(L)] = std::move(ug.blocks);
                Eigen::MatrixXd acc_g = std::move(ug.input);
                for (int l = L; l >= m_min_; --l) {
                    if (!nets_[idx(l)].empty())
                        branch_out_g[idx(l)] = acc_g;
                    if (l > m_min_) {
                        auto g2 = up_[idx(l - 1)].backward(tp.up[idx(l - 1)], acc_g);
                        up_g[idx(l - 1)] = std::move(g2.blocks);
                        acc_g = std::move(g2.input);
                    }
                }
            }
            // branch nets back to their projected inputs
            std::vector<Eigen::MatrixXd> d_grad(down_.size());
            for (int l = m_min_; l <= L; ++l) {
                if (nets_[idx(l)].empty())
                    continue;
                Eigen::MatrixXd bg = std::move(branch_out_g[idx(l)]);
                net_g[idx(l)].resize(zeta_);
                for (int t = zeta_ - 1; t >= 0; --t) {
                    auto lg = nets_[idx(l)][t].backward(tp.net[idx(l)][t], bg);
                    net_g[idx(l)][t] = std::move(lg.weights);
                    bg = std::move(lg.input);
                }
                d_grad[idx(l)] = std::move(bg);
            }
            // ascend the down-chain back to the input
            Eigen::MatrixXd carry; // gradient flowing into d[l]
            for (int l = m_min_; l <= L; ++l) {
                Eigen::MatrixXd total;
                if (carry.size() && d_grad[idx(l)].size())
                    total = carry + d_grad[idx(l)];
                else if (carry.size())
                    total = std::move(carry);
                else if (d_grad[idx(l)].size())
                    total = std::move(d_grad[idx(l)]);
                if (!total.size()) {
                    // no branch at or below this level fed the objective
                    down_g[idx(l)].assign(down_[idx(l)].block_count(), Eigen::MatrixXd());
                    carry = Eigen::MatrixXd();
                    continue;
                }
                auto dg = down_[idx(l)].backward(tp.down[idx(l)], total);
                down_g[idx(l)] = std::move(dg.blocks);
                carry = std::move(dg.input);
            }
            if (carry.size())
                q_grad += carry;
        }

        // zero-fill any gradient a dead pathway never produced
        auto ensure = [](std::vector<Eigen::MatrixXd>& gs, const std::vector<Eigen::MatrixXd>& ws) {
            if (gs.size() != ws.size())
                gs.assign(ws.size(), Eigen::MatrixXd());
            for (std::size_t k = 0; k < ws.size(); ++k)
                if (!gs[k].size())
                    gs[k] = Eigen::MatrixXd::Zero(ws[k].rows(), ws[k].cols());
        };

        std::vector<Eigen::MatrixXd> out;
        for (int t = 0; t < zeta_; ++t) {
            ensure(close_g[t], close_[t].weights());
            for (auto& m : close_g[t]) out.push_back(std::move(m));
        }
        for (int k = 0; k < int(down_.size()); ++k) {
            ensure(down_g[k], down_[k].blocks());
            for (auto& m : down_g[k]) out.push_back(std::move(m));
            ensure(up_g[k], up_[k].blocks());
            for (auto& m : up_g[k]) out.push_back(std::move(m));
            if (net_g[k].size() != nets_[k].size())
                net_g[k].resize(nets_[k].size());
            for (int t = 0; t < int(nets_[k].size()); ++t) {
                ensure(net_g[k][t], nets_[k][t].weights());
                for (auto& m : net_g[k][t]) out.push_back(std::move(m));
            }
        }
        if (input_grad)
            *input_grad = std::move(q_grad);
        return out;
    }

private:
    Activation hidden_or_final(int t) const {
        return t + 1 < zeta_ ? Activation::relu : Activation::identity;
    }
    int idx(int level) const { return level - m_min_; }

    H2Skeleton skel_;
    int zeta_ = 0;
    int m_min_ = 0;
    double scale_ = 1.0;
    std::vector<BlockSparseLayer> close_;
    std::vector<BlockDiagLayer> down_, up_;
    std::vector<std::vector<BlockSparseLayer>> nets_;
};

// Copy the factors of a compressed linear operator into a zeta=1 network;
// the result computes exactly that operator's matvec. Boxes the oracle never
// produced a basis for become zero blocks.
inline H2Network embed_h2matrix(H2Network net, const H2Matrix& m) {
    if (net.zeta() != 1)
        throw std::invalid_argument("embed_h2matrix: needs a zeta=1 (purely linear) network");
    const H2Skeleton& a = net.skeleton();
    const H2Skeleton& b = m.skeleton;
    if (a.n != b.n || a.levels != b.levels || a.leaf_block != b.leaf_block || a.ranks != b.ranks ||
        a.close_template.pairs != b.close_template.pairs)
        throw std::invalid_argument("embed_h2matrix: operator and network skeletons disagree");
    for (int l = 1; l <= a.levels; ++l)
        if (a.interaction[l - 1].pairs != b.interaction[l - 1].pairs)
            throw std::invalid_argument("embed_h2matrix: interaction templates disagree at level " +
                                        std::to_string(l));

    net.set_output_scale(1.0); // the operator's scale lives in its blocks
    for (int k = 0; k < a.close_template.pair_count(); ++k)
        net.close_net()[0].set_weight(k, m.close_blocks[k]);
    for (int l = net.min_level(); l <= a.levels; ++l) {
        const int r = a.rank_at(l), rows = a.basis_rows(l);
        for (int box = 0; box < a.boxes_at(l); ++box) {
            const Eigen::MatrixXd& v = m.col_basis[l - 1][box];
            const Eigen::MatrixXd& u = m.row_basis[l - 1][box];
            net.down_layer(l).set_block(box, v.size() ? v : Eigen::MatrixXd::Zero(r, rows));
            net.up_layer(l).set_block(box, u.size() ? u : Eigen::MatrixXd::Zero(rows, r));
        }
        if (!net.branch_net(l).empty())
            for (int k = 0; k < a.interaction[l - 1].pair_count(); ++k)
                net.branch_net(l)[0].set_weight(k, m.interaction_blocks[l - 1][k]);
    }
    return net;
}

// Plain 1D convolutional stack: kernel 7, circular padding, no bias, ReLU
// between layers, linear head. Channel data is stacked row-blockwise, so all
// shapes and the parameter count are independent of n.
class ConvBaseline {
public:
    struct Tape {
        std::vector<LayerTape> layer; // input / pre per conv layer
        Eigen::Index batch = -1;
    };

    ConvBaseline(int n, Rng& rng, int layers = 5, int channels = 8, int kernel = 7)
        : n_(n), kernel_(kernel) {
        if (n < 1 || layers < 1 || channels < 1 || kernel < 1 || kernel % 2 == 0)
            throw std::invalid_argument("ConvBaseline: bad architecture (kernel must be odd)");
        for (int l = 0; l < layers; ++l) {
            in_ch_.push_back(l == 0 ? 1 : channels);
            out_ch_.push_back(l == layers - 1 ? 1 : channels);
            w_.emplace_back(out_ch_[l], in_ch_[l] * kernel);
            glorot_uniform_init(w_.back(), rng);
        }
    }

    int size() const { return n_; }
    int layer_count() const { return int(w_.size()); }
    int kernel_width() const { return kernel_; }
    int channels() const { return layer_count() > 1 ? int(w_[0].rows()) : 1; }
    std::vector<Eigen::MatrixXd>& kernels() { return w_; }

    double output_scale() const { return scale_; }
    void set_output_scale(double s) {
        if (!(s > 0) || !std::isfinite(s))
            throw std::invalid_argument("ConvBaseline: output scale must be positive and finite");
        scale_ = s;
    }

    std::vector<Eigen::MatrixXd*> parameters() {
        std::vector<Eigen::MatrixXd*> out;
        for (auto& w : w_)
            out.push_back(&w);
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t c = 0;
        for (auto& w : w_)
            c += w.size();
        return c;
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& q, Tape* tape = nullptr) const {
        if (q.rows() != n_)
            throw std::invalid_argument("ConvBaseline: input has " + std::to_string(q.rows()) +
                                        " rows, network expects " + std::to_string(n_));
        Tape local;
        Tape& tp = tape ? *tape : local;
        tp.layer.assign(w_.size(), {});
        tp.batch = q.cols();

        Eigen::MatrixXd x = q;
        for (int l = 0; l < layer_count(); ++l) {
            tp.layer[l].input = x;
            Eigen::MatrixXd pre = Eigen::MatrixXd::Zero(std::int64_t(out_ch_[l]) * n_, q.cols());
            for (int t = 0; t < kernel_; ++t) {
                Eigen::MatrixXd sh = shifted(x, in_ch_[l], t - kernel_ / 2, q.cols());
                for (int o = 0; o < out_ch_[l]; ++o)
                    for (int i = 0; i < in_ch_[l]; ++i)
                        pre.middleRows(std::int64_t(o) * n_, n_).noalias() +=
                            w_[l](o, i * kernel_ + t) * sh.middleRows(std::int64_t(i) * n_, n_);
            }
            const bool last = l + 1 == layer_count();
            tp.layer[l].pre = last ? Eigen::MatrixXd() : pre;
            x = last ? std::move(pre) : relu(pre);
        }
        if (scale_ != 1.0)
            x *= scale_;
        return x;
    }

    std::vector<Eigen::MatrixXd> backward(const Tape& tp, const Eigen::MatrixXd& out_grad,
                                          Eigen::MatrixXd* input_grad = nullptr) const {
        if (tp.batch != out_grad.cols() || out_grad.rows() != n_)
            throw std::invalid_argument("ConvBaseline: output gradient does not match the taped forward");
        std::vector<Eigen::MatrixXd> grads(w_.size());
        Eigen::MatrixXd g = scale_ * out_grad; // tape holds pre-scale activations
        for (int l = layer_count() - 1; l >= 0; --l) {
            if (tp.layer[l].pre.size())
                g = (g.array() * relu_grad(tp.layer[l].pre)).matrix();
            grads[l] = Eigen::MatrixXd::Zero(w_[l].rows(), w_[l].cols());
            Eigen::MatrixXd gin = Eigen::MatrixXd::Zero(std::int64_t(in_ch_[l]) * n_, g.cols());
            for (int t = 0; t < kernel_; ++t) {
                const int d = t - kernel_ / 2;
                Eigen::MatrixXd sh = shifted(tp.layer[l].input, in_ch_[l], d, g.cols());
                Eigen::MatrixXd gsh = shifted(g, out_ch_[l], -d, g.cols());
                for (int o = 0; o < out_ch_[l]; ++o)
                    for (int i = 0; i < in_ch_[l]; ++i) {
                        grads[l](o, i * kernel_ + t) =
                            (g.middleRows(std::int64_t(o) * n_, n_).array() *
                             sh.middleRows(std::int64_t(i) * n_, n_).array()).sum();
                        gin.middleRows(std::int64_t(i) * n_, n_).noalias() +=
                            w_[l](o, i * kernel_ + t) * gsh.middleRows(std::int64_t(o) * n_, n_);
                    }
            }
            g = std::move(gin);
        }
        if (input_grad)
            *input_grad = std::move(g);
        return grads;
    }

private:
    // channel-wise circular row shift: row n of the result is row (n+d) mod n_
    Eigen::MatrixXd shifted(const Eigen::MatrixXd& x, int channels, int d, Eigen::Index cols) const {
        Eigen::MatrixXd out(x.rows(), cols);
        const int s = ((d % n_) + n_) % n_;
        for (int c = 0; c < channels; ++c) {
            auto src = x.middleRows(std::int64_t(c) * n_, n_);
            auto dst = out.middleRows(std::int64_t(c) * n_, n_);
            dst.topRows(n_ - s) = src.bottomRows(n_ - s);
            dst.bottomRows(s) = src.topRows(s);
        }
        return out;
    }

    int n_ = 0, kernel_ = 0;
    double scale_ = 1.0;
    std::vector<int> in_ch_, out_ch_;
    std::vector<Eigen::MatrixXd> w_; // per layer, (out_ch) x (in_ch * kernel)
};

inline std::int64_t count_parameters(const H2Network& net) { return net.parameter_count(); }
inline std::int64_t count_parameters(const ConvBaseline& net) { return net.parameter_count(); }
inline std::int64_t count_parameters(const BlockSparseLayer& layer) {
    std::int64_t c = 0;
    for (auto& w : layer.weights())
        c += w.size();
    return c;
}

} // namespace h2nn
