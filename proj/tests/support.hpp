// Helpers shared between the unit tests and the acceptance runner; kept free
// of any test-framework dependency on purpose.
#pragma once

#include <h2nn/rng.hpp>
#include <h2nn/skeleton.hpp>

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace h2nn::testing {

// Central-difference gradient check against a reverse-mode implementation.
// The scalar objective is phi = <P, F> for a fixed random projection P, so
// backward(P) must return the gradients of phi. Relu kinks are the caller's
// problem: configurations whose pre-activations sit within ~1e-4 of zero
// should be re-drawn before checking, otherwise the difference quotient
// crosses the kink.
struct FdProblem {
    std::vector<Eigen::MatrixXd*> params;
    Eigen::MatrixXd* input = nullptr; // optional: input gradient checked too
    std::function<Eigen::MatrixXd()> forward;
    // out_grad -> (input_grad, param grads aligned with params)
    std::function<std::pair<Eigen::MatrixXd, std::vector<Eigen::MatrixXd>>(const Eigen::MatrixXd&)>
        backward;
};

inline double fd_max_rel_err(FdProblem& prob, Rng& rng, double step = 1e-6,
                             int probes_per_block = 8) {
    Eigen::MatrixXd out = prob.forward();
    Eigen::MatrixXd proj(out.rows(), out.cols());
    for (Eigen::Index r = 0; r < proj.rows(); ++r)
        for (Eigen::Index c = 0; c < proj.cols(); ++c)
            proj(r, c) = rng.uniform(-1.0, 1.0);
    auto [input_grad, param_grads] = prob.backward(proj);

    auto phi = [&]() { return (prob.forward().array() * proj.array()).sum(); };
    double worst = 0;
    auto probe = [&](Eigen::MatrixXd& block, const Eigen::MatrixXd& analytic) {
        const Eigen::Index count = block.size();
        for (int p = 0; p < std::min<Eigen::Index>(probes_per_block, count); ++p) {
            Eigen::Index idx = count <= probes_per_block ? p : Eigen::Index(rng.below(count));
            double saved = block(idx);
            block(idx) = saved + step;
            double hi = phi();
            block(idx) = saved - step;
            double lo = phi();
            block(idx) = saved;
            double fd = (hi - lo) / (2 * step);
            double an = analytic(idx);
            double err = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-6);
            worst = std::max(worst, err);
        }
    };
    for (std::size_t k = 0; k < prob.params.size(); ++k)
        probe(*prob.params[k], param_grads[k]);
    if (prob.input)
        probe(*prob.input, input_grad);
    return worst;
}

// Expand every template of the skeleton to leaf index space and check that
// the blocks tile {0..N-1}^2 exactly once. Returns an empty string on
// success, a diagnostic otherwise. Quadratic in N; meant for N <= 256.
inline std::string check_tiling(const H2Skeleton& s) {
    const int n = s.n;
    std::vector<int> hits(std::size_t(n) * n, 0);
    auto mark = [&](int level, int bi, int bj) {
        const int span = n / s.boxes_at(level);
        for (int r = bi * span; r < (bi + 1) * span; ++r)
            for (int c = bj * span; c < (bj + 1) * span; ++c)
                hits[std::size_t(r) * n + c]++;
    };
    for (auto& [i, j] : s.close_template.pairs)
        mark(s.levels, i, j);
    for (int l = 1; l <= s.levels; ++l)
        for (auto& [i, j] : s.interaction[l - 1].pairs)
            mark(l, i, j);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            if (hits[std::size_t(r) * n + c] != 1)
                return "entry (" + std::to_string(r) + "," + std::to_string(c) + ") covered " +
                       std::to_string(hits[std::size_t(r) * n + c]) + " times (n=" +
                       std::to_string(n) + ", levels=" + std::to_string(s.levels) + ")";
    return {};
}

inline bool templates_equal(const BlockPairTemplate& a, const BlockPairTemplate& b) {
    return a.level == b.level && a.pairs == b.pairs &&
           a.row_sizes == b.row_sizes && a.col_sizes == b.col_sizes;
}

inline bool skeletons_equal(const H2Skeleton& a, const H2Skeleton& b) {
    if (a.n != b.n || a.dim != b.dim || a.eta != b.eta || a.levels != b.levels ||
        a.leaf_block != b.leaf_block || a.separation != b.separation || a.ranks != b.ranks)
        return false;
    if (!templates_equal(a.close_template, b.close_template))
        return false;
    for (int l = 0; l < a.levels; ++l)
        if (!templates_equal(a.interaction[l], b.interaction[l]))
            return false;
    return true;
}

} // namespace h2nn::testing
