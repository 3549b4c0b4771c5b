// Reference H^2 representation of a dense kernel matrix on a given skeleton:
// SVD-based nested bases, per-level interaction blocks, and the fast matvec
//
//   w = C q + sum_m U_L ... U_m M_m V_m ... V_L q
//
// evaluated with one downward projection sweep and one upward accumulation
// sweep. This is the linear oracle the network variant is checked against.
#pragma once

#include "skeleton.hpp"

#include <Eigen/Dense>

#include <map>

namespace h2nn {

struct H2Matrix {
    H2Skeleton skeleton;
    std::vector<Eigen::MatrixXd> close_blocks;                    // close_template order, B x B
    std::vector<std::vector<Eigen::MatrixXd>> interaction_blocks; // [l-1][pair], r_l x r_l
    std::vector<std::vector<Eigen::MatrixXd>> row_basis;          // [l-1][box] U~_i, basis_rows x r_l; 0x0 when the box has no far partner
    std::vector<std::vector<Eigen::MatrixXd>> col_basis;          // [l-1][box] V~_j, r_l x basis_rows

    int size() const { return skeleton.n; }
};

// All far pairs per level, reconstructed from the templates alone:
// far_1 = M_1, far_l = M_l plus the children of far pairs one level up.
inline std::vector<std::vector<std::pair<int, int>>> far_pairs_by_level(const H2Skeleton& s) {
    std::vector<std::vector<std::pair<int, int>>> far(s.levels);
    for (int l = 1; l <= s.levels; ++l) {
        auto& out = far[l - 1];
        out = s.interaction[l - 1].pairs;
        if (l > 1) {
            for (auto& [pi, pj] : far[l - 2])
                for (int a = 0; a < s.eta; ++a)
                    for (int b = 0; b < s.eta; ++b)
                        out.emplace_back(pi * s.eta + a, pj * s.eta + b);
        }
        std::sort(out.begin(), out.end());
    }
    return far;
}

struct CompressOptions {
    // 0 keeps the skeleton's ranks as given; positive values drop singular
    // values below rel_tol * sigma_max per box and shrink each level's rank
    // to the largest kept count (the skeleton rank acts as a cap)
    double rel_tol = 0.0;
};

namespace detail {

inline int find_pair(const std::vector<std::pair<int, int>>& sorted, int i, int j) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), std::make_pair(i, j));
    if (it == sorted.end() || *it != std::make_pair(i, j))
        return -1;
    return int(it - sorted.begin());
}

} // namespace detail

inline H2Matrix compress_dense(const Eigen::MatrixXd& a, H2Skeleton skeleton,
                               CompressOptions opt = {}) {
    skeleton.validate();
    const int n = skeleton.n;
    if (a.rows() != n || a.cols() != n)
        throw std::invalid_argument("compress_dense: matrix is " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + ", skeleton expects " +
                                    std::to_string(n) + "x" + std::to_string(n));
    const int levels = skeleton.levels;
    const int eta = skeleton.eta;
    const int leaf = skeleton.leaf_block;
    for (int l = levels; l >= 1; --l) {
        const int cap = l == levels ? leaf : eta * skeleton.rank_at(l + 1);
        if (skeleton.rank_at(l) > cap)
            throw std::invalid_argument("compress_dense: rank " + std::to_string(skeleton.rank_at(l)) +
                                        " at level " + std::to_string(l) +
                                        " exceeds the available block dimension " + std::to_string(cap));
    }

    H2Matrix m;
    m.interaction_blocks.resize(levels);
    m.row_basis.resize(levels);
    m.col_basis.resize(levels);

    for (auto& [i, j] : skeleton.close_template.pairs)
        m.close_blocks.push_back(a.block(std::int64_t(i) * leaf, std::int64_t(j) * leaf, leaf, leaf));

    const auto far = far_pairs_by_level(skeleton);

    // blocks of the current level's far pairs, aligned with far[l-1]
    std::vector<Eigen::MatrixXd> cur;
    for (int l = levels; l >= 1; --l) {
        const auto& fp = far[l - 1];
        const int h = skeleton.boxes_at(l);
        const int rows = skeleton.basis_rows(l);
        m.row_basis[l - 1].resize(h);
        m.col_basis[l - 1].resize(h);
        if (fp.empty()) {
            cur.clear();
            continue;
        }
        if (l == levels) {
            cur.reserve(fp.size());
            for (auto& [i, j] : fp)
                cur.push_back(a.block(std::int64_t(i) * leaf, std::int64_t(j) * leaf, leaf, leaf));
        }

        std::vector<std::vector<int>> by_row(h), by_col(h);
        for (int k = 0; k < int(fp.size()); ++k) {
            by_row[fp[k].first].push_back(k);
            by_col[fp[k].second].push_back(k);
        }

        struct BoxSvd { Eigen::MatrixXd vectors; Eigen::VectorXd values; };
        std::vector<BoxSvd> row_svd(h), col_svd(h);
        for (int i = 0; i < h; ++i) {
            if (!by_row[i].empty()) {
                Eigen::MatrixXd cat(rows, std::int64_t(rows) * by_row[i].size());
                for (int t = 0; t < int(by_row[i].size()); ++t)
                    cat.middleCols(std::int64_t(t) * rows, rows) = cur[by_row[i][t]];
                Eigen::BDCSVD<Eigen::MatrixXd> svd(cat, Eigen::ComputeThinU);
                row_svd[i] = {svd.matrixU(), svd.singularValues()};
            }
            if (!by_col[i].empty()) {
                Eigen::MatrixXd cat(std::int64_t(rows) * by_col[i].size(), rows);
                for (int t = 0; t < int(by_col[i].size()); ++t)
                    cat.middleRows(std::int64_t(t) * rows, rows) = cur[by_col[i][t]];
                Eigen::BDCSVD<Eigen::MatrixXd> svd(cat, Eigen::ComputeThinV);
                col_svd[i] = {svd.matrixV(), svd.singularValues()};
            }
        }

        int rank = skeleton.rank_at(l);
        if (opt.rel_tol > 0) {
            int need = 1;
            auto kept = [&](const Eigen::VectorXd& sv) {
                int k = 0;
                for (int t = 0; t < sv.size(); ++t)
                    if (sv[t] > opt.rel_tol * sv[0]) ++k;
                return std::max(k, 1);
            };
            for (int i = 0; i < h; ++i) {
                if (row_svd[i].values.size()) need = std::max(need, kept(row_svd[i].values));
                if (col_svd[i].values.size()) need = std::max(need, kept(col_svd[i].values));
            }
            rank = std::min(rank, need);
            skeleton.ranks[l - 1] = rank;
            skeleton.interaction[l - 1].row_sizes.assign(h, rank);
            skeleton.interaction[l - 1].col_sizes.assign(h, rank);
        }

        for (int i = 0; i < h; ++i) {
            if (row_svd[i].values.size())
                m.row_basis[l - 1][i] = row_svd[i].vectors.leftCols(rank);
            if (col_svd[i].values.size())
                m.col_basis[l - 1][i] = col_svd[i].vectors.leftCols(rank).transpose();
        }

        // project this level's far blocks, then hand the non-interaction part
        // up as assembled parent blocks: M^_L = M_L + F_{L-1} level by level
        std::vector<Eigen::MatrixXd> next;
        const auto* fp_up = l > 1 ? &far[l - 2] : nullptr;
        if (fp_up)
            next.assign(fp_up->size(), Eigen::MatrixXd::Zero(std::int64_t(eta) * rank, std::int64_t(eta) * rank));
        m.interaction_blocks[l - 1].resize(skeleton.interaction[l - 1].pair_count());
        for (int k = 0; k < int(fp.size()); ++k) {
            auto [i, j] = fp[k];
            Eigen::MatrixXd proj = m.row_basis[l - 1][i].transpose() * cur[k] * m.col_basis[l - 1][j].transpose();
            int t = detail::find_pair(skeleton.interaction[l - 1].pairs, i, j);
            if (t >= 0) {
                m.interaction_blocks[l - 1][t] = std::move(proj);
            } else {
                int p = detail::find_pair(*fp_up, i / eta, j / eta);
                if (p < 0)
                    throw std::logic_error("compress_dense: far pair has neither an interaction "
                                           "slot nor a far parent; skeleton is inconsistent");
                next[p].block(std::int64_t(i % eta) * rank, std::int64_t(j % eta) * rank, rank, rank) = proj;
            }
        }
        cur = std::move(next);
    }

    m.skeleton = std::move(skeleton);
    return m;
}

inline Eigen::VectorXd h2_matvec(const H2Matrix& m, const Eigen::VectorXd& q) {
    const H2Skeleton& s = m.skeleton;
    if (q.size() != s.n)
        throw std::invalid_argument("h2_matvec: vector length " + std::to_string(q.size()) +
                                    " does not match matrix size " + std::to_string(s.n));
    const int L = s.levels, B = s.leaf_block;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(s.n);
    for (int k = 0; k < s.close_template.pair_count(); ++k) {
        auto [i, j] = s.close_template.pairs[k];
        w.segment(std::int64_t(i) * B, B) += m.close_blocks[k] * q.segment(std::int64_t(j) * B, B);
    }

    // downward sweep: projected coefficients per level, absent boxes stay zero
    std::vector<Eigen::VectorXd> qhat(L + 1);
    for (int l = L; l >= 1; --l) {
        const int r = s.rank_at(l), rows = s.basis_rows(l);
        qhat[l] = Eigen::VectorXd::Zero(std::int64_t(r) * s.boxes_at(l));
        for (int j = 0; j < s.boxes_at(l); ++j) {
            const Eigen::MatrixXd& v = m.col_basis[l - 1][j];
            if (v.size() == 0) continue;
            if (l == L)
                qhat[l].segment(std::int64_t(j) * r, r) = v * q.segment(std::int64_t(j) * rows, rows);
            else
                qhat[l].segment(std::int64_t(j) * r, r) = v * qhat[l + 1].segment(std::int64_t(j) * rows, rows);
        }
    }

    // interaction application and upward sweep
    Eigen::VectorXd acc; // coefficients at the current level
    for (int l = 1; l <= L; ++l) {
        const int r = s.rank_at(l);
        Eigen::VectorXd what = Eigen::VectorXd::Zero(std::int64_t(r) * s.boxes_at(l));
        for (int k = 0; k < s.interaction[l - 1].pair_count(); ++k) {
            auto [i, j] = s.interaction[l - 1].pairs[k];
            what.segment(std::int64_t(i) * r, r) +=
                m.interaction_blocks[l - 1][k] * qhat[l].segment(std::int64_t(j) * r, r);
        }
        if (l == 1) {
            acc = std::move(what);
            continue;
        }
        // lift the accumulated coarser-level part into this level's space
        const int r_up = s.rank_at(l - 1);
        for (int i = 0; i < s.boxes_at(l - 1); ++i) {
            const Eigen::MatrixXd& u = m.row_basis[l - 2][i];
            if (u.size() == 0) continue;
            what.segment(std::int64_t(i) * u.rows(), u.rows()) +=
                u * acc.segment(std::int64_t(i) * r_up, r_up);
        }
        acc = std::move(what);
    }
    if (L >= 1 && acc.size()) {
        for (int i = 0; i < s.boxes_at(L); ++i) {
            const Eigen::MatrixXd& u = m.row_basis[L - 1][i];
            if (u.size() == 0) continue;
            w.segment(std::int64_t(i) * B, B) += u * acc.segment(std::int64_t(i) * s.rank_at(L), s.rank_at(L));
        }
    }
    return w;
}

inline Eigen::MatrixXd reconstruct(const H2Matrix& m) {
    const int n = m.size();
    if (n > 4096)
        throw std::invalid_argument("reconstruct: refusing to densify n=" + std::to_string(n) +
                                    " (guard at 4096)");
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) {
        e[k] = 1;
        a.col(k) = h2_matvec(m, e);
        e[k] = 0;
    }
    return a;
}

inline std::int64_t count_entries(const H2Matrix& m) {
    std::int64_t c = 0;
    for (auto& b : m.close_blocks) c += b.size();
    for (auto& lvl : m.interaction_blocks)
        for (auto& b : lvl) c += b.size();
    for (auto& lvl : m.row_basis)
        for (auto& b : lvl) c += b.size();
    for (auto& lvl : m.col_basis)
        for (auto& b : lvl) c += b.size();
    return c;
}

} // namespace h2nn
