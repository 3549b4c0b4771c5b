// Block-structured linear layers with reverse-mode gradients. Data matrices
// carry one sample per column so a whole batch moves through each block as a
// single gemm. No bias terms anywhere: layers compute f[W t] literally.
#pragma once

#include "skeleton.hpp"

#include <Eigen/Dense>

namespace h2nn {

enum class Activation { identity, relu };

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

// derivative mask; 0 at the kink
inline Eigen::ArrayXXd relu_grad(const Eigen::MatrixXd& pre) {
    return (pre.array() > 0.0).cast<double>();
}

struct BlockLayout {
    std::vector<int> sizes, offsets;
    int total = 0;

    static BlockLayout from_sizes(const std::vector<int>& sz) {
        BlockLayout out;
        out.sizes = sz;
        out.offsets.reserve(sz.size());
        for (int s : sz) {
            out.offsets.push_back(out.total);
            out.total += s;
        }
        return out;
    }
};

struct LayerTape {
    Eigen::MatrixXd input; // in_dim x batch
    Eigen::MatrixXd pre;   // out_dim x batch, kept only when the activation needs it
};

// y_i = f( sum over template pairs (i,j) of W_ij x_j )
class BlockSparseLayer {
public:
    BlockSparseLayer(BlockPairTemplate tpl, Activation act)
        : tpl_(std::move(tpl)), act_(act),
          in_(BlockLayout::from_sizes(tpl_.col_sizes)),
          out_(BlockLayout::from_sizes(tpl_.row_sizes)) {
        if (tpl_.row_sizes.empty() || tpl_.col_sizes.empty())
            throw std::invalid_argument("BlockSparseLayer: template carries no block sizes");
        w_.reserve(tpl_.pairs.size());
        for (auto& [i, j] : tpl_.pairs)
            w_.push_back(Eigen::MatrixXd::Zero(tpl_.row_sizes.at(i), tpl_.col_sizes.at(j)));
    }

    const BlockPairTemplate& tpl() const { return tpl_; }
    Activation activation() const { return act_; }
    int in_dim() const { return in_.total; }
    int out_dim() const { return out_.total; }
    std::vector<Eigen::MatrixXd>& weights() { return w_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return w_; }

    void set_weight(int k, Eigen::MatrixXd w) {
        auto [i, j] = tpl_.pairs.at(k);
        if (w.rows() != tpl_.row_sizes[i] || w.cols() != tpl_.col_sizes[j])
            throw std::invalid_argument(
                "BlockSparseLayer: block (" + std::to_string(i) + "," + std::to_string(j) +
                ") expects " + std::to_string(tpl_.row_sizes[i]) + "x" + std::to_string(tpl_.col_sizes[j]) +
                ", got " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
        w_[k] = std::move(w);
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, LayerTape* tape = nullptr) const {
        if (x.rows() != in_.total)
            throw std::invalid_argument("BlockSparseLayer: input has " + std::to_string(x.rows()) +
                                        " rows, layer expects " + std::to_string(in_.total));
        Eigen::MatrixXd pre = Eigen::MatrixXd::Zero(out_.total, x.cols());
        for (int k = 0; k < int(w_.size()); ++k) {
            auto [i, j] = tpl_.pairs[k];
            pre.middleRows(out_.offsets[i], out_.sizes[i]).noalias() +=
                w_[k] * x.middleRows(in_.offsets[j], in_.sizes[j]);
        }
        if (tape) {
            tape->input = x;
            tape->pre = act_ == Activation::relu ? pre : Eigen::MatrixXd();
        }
        return act_ == Activation::relu ? relu(pre) : pre;
    }

    struct Grads {
        Eigen::MatrixXd input;
        std::vector<Eigen::MatrixXd> weights;
    };

    Grads backward(const LayerTape& tape, const Eigen::MatrixXd& out_grad) const {
        if (out_grad.rows() != out_.total || tape.input.rows() != in_.total ||
            out_grad.cols() != tape.input.cols())
            throw std::invalid_argument("BlockSparseLayer: gradient/tape shapes do not match the layer");
        Eigen::MatrixXd d_pre = act_ == Activation::relu
                                    ? (out_grad.array() * relu_grad(tape.pre)).matrix()
                                    : out_grad;
        Grads g;
        g.input = Eigen::MatrixXd::Zero(in_.total, tape.input.cols());
        g.weights.resize(w_.size());
        for (int k = 0; k < int(w_.size()); ++k) {
            auto [i, j] = tpl_.pairs[k];
            auto dp = d_pre.middleRows(out_.offsets[i], out_.sizes[i]);
            g.weights[k].noalias() =
                dp * tape.input.middleRows(in_.offsets[j], in_.sizes[j]).transpose();
            g.input.middleRows(in_.offsets[j], in_.sizes[j]).noalias() += w_[k].transpose() * dp;
        }
        return g;
    }

private:
    BlockPairTemplate tpl_;
    Activation act_;
    BlockLayout in_, out_;
    std::vector<Eigen::MatrixXd> w_;
};

// y_i = W_i x_i, one block per box; the transfer factors U_l / V_l
class BlockDiagLayer {
public:
    BlockDiagLayer(std::vector<int> out_sizes, std::vector<int> in_sizes)
        : in_(BlockLayout::from_sizes(in_sizes)), out_(BlockLayout::from_sizes(out_sizes)) {
        if (in_sizes.size() != out_sizes.size() || in_sizes.empty())
            throw std::invalid_argument("BlockDiagLayer: need matching nonempty size lists");
        w_.reserve(in_sizes.size());
        for (std::size_t b = 0; b < in_sizes.size(); ++b)
            w_.push_back(Eigen::MatrixXd::Zero(out_sizes[b], in_sizes[b]));
    }

    BlockDiagLayer(int boxes, int out_size, int in_size)
        : BlockDiagLayer(std::vector<int>(boxes, out_size), std::vector<int>(boxes, in_size)) {}

    int in_dim() const { return in_.total; }
    int out_dim() const { return out_.total; }
    int block_count() const { return int(w_.size()); }
    std::vector<Eigen::MatrixXd>& blocks() { return w_; }
    const std::vector<Eigen::MatrixXd>& blocks() const { return w_; }

    void set_block(int b, Eigen::MatrixXd w) {
        if (w.rows() != out_.sizes.at(b) || w.cols() != in_.sizes.at(b))
            throw std::invalid_argument("BlockDiagLayer: block " + std::to_string(b) + " expects " +
                                        std::to_string(out_.sizes[b]) + "x" + std::to_string(in_.sizes[b]));
        w_[b] = std::move(w);
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, LayerTape* tape = nullptr) const {
        if (x.rows() != in_.total)
            throw std::invalid_argument("BlockDiagLayer: input has " + std::to_string(x.rows()) +
                                        " rows, layer expects " + std::to_string(in_.total));
        Eigen::MatrixXd y(out_.total, x.cols());
        for (int b = 0; b < int(w_.size()); ++b)
            y.middleRows(out_.offsets[b], out_.sizes[b]).noalias() =
                w_[b] * x.middleRows(in_.offsets[b], in_.sizes[b]);
        if (tape) {
            tape->input = x;
            tape->pre = Eigen::MatrixXd();
        }
        return y;
    }

    struct Grads {
        Eigen::MatrixXd input;
        std::vector<Eigen::MatrixXd> blocks;
    };

    Grads backward(const LayerTape& tape, const Eigen::MatrixXd& out_grad) const {
        if (out_grad.rows() != out_.total || tape.input.rows() != in_.total ||
            out_grad.cols() != tape.input.cols())
            throw std::invalid_argument("BlockDiagLayer: gradient/tape shapes do not match the layer");
        Grads g;
        g.input.resize(in_.total, tape.input.cols());
        g.blocks.resize(w_.size());
        for (int b = 0; b < int(w_.size()); ++b) {
            auto dp = out_grad.middleRows(out_.offsets[b], out_.sizes[b]);
            g.blocks[b].noalias() =
                dp * tape.input.middleRows(in_.offsets[b], in_.sizes[b]).transpose();
            g.input.middleRows(in_.offsets[b], in_.sizes[b]).noalias() = w_[b].transpose() * dp;
        }
        return g;
    }

private:
    BlockLayout in_, out_;
    std::vector<Eigen::MatrixXd> w_;
};

} // namespace h2nn
