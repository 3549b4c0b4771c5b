// Block skeletons: which box pairs interact directly at which level.
//
// At every level, a pair of boxes is close when their centers are within
// separation * box_width of each other; everything else is far. A far pair
// whose parent pair is close belongs to the interaction list of its level;
// far pairs with far parents are handled higher up. The leaf close pairs
// plus the expanded interaction lists tile the full index set exactly once.
#pragma once

#include "geometry.hpp"

#include <algorithm>
#include <cstdint>
#include <utility>

namespace h2nn {

struct BlockPairTemplate {
    int level = 0;
    std::vector<std::pair<int, int>> pairs; // (receiver box, source box), lex sorted
    std::vector<int> row_sizes;             // per-box block dims; empty until assigned
    std::vector<int> col_sizes;

    int pair_count() const { return int(pairs.size()); }
    bool empty() const { return pairs.empty(); }

    bool contains(int i, int j) const {
        return std::binary_search(pairs.begin(), pairs.end(), std::make_pair(i, j));
    }

    std::int64_t entry_count() const {
        std::int64_t s = 0;
        for (auto& [i, j] : pairs)
            s += std::int64_t(row_sizes.at(i)) * col_sizes.at(j);
        return s;
    }
};

struct LevelPairs {
    std::vector<std::pair<int, int>> close, far; // both lex sorted
};

inline LevelPairs classify_level(const ClusterTree& recv, const ClusterTree& src,
                                 int level, double separation) {
    if (level < 0 || level > recv.levels || level > src.levels)
        throw std::invalid_argument("classify_level: level " + std::to_string(level) +
                                    " out of range");
    if (!(separation > 0))
        throw std::invalid_argument("classify_level: separation must be positive");
    const double width = std::max(recv.level[level].width, src.level[level].width);
    const double cutoff = separation * width;
    LevelPairs out;
    const int hr = recv.boxes_at(level), hs = src.boxes_at(level);
    for (int i = 0; i < hr; ++i) {
        for (int j = 0; j < hs; ++j) {
            double d = 0;
            for (int ax = 0; ax < recv.dim; ++ax) {
                double t = recv.level[level].boxes[i].center(ax) - src.level[level].boxes[j].center(ax);
                d += t * t;
            }
            if (std::sqrt(d) <= cutoff)
                out.close.emplace_back(i, j);
            else
                out.far.emplace_back(i, j);
        }
    }
    return out;
}

// Interaction lists for levels 1..L (index l-1). The recursion starts from
// the root pair, which is always treated as close, so every far pair is
// represented at exactly one level. Throws if closeness is not nested
// (a close pair with a far parent), which breaks the level recursion;
// larger separation values restore nesting.
inline std::vector<BlockPairTemplate> build_interaction_lists(const ClusterTree& recv,
                                                              const ClusterTree& src,
                                                              double separation) {
    if (recv.dim != src.dim || recv.levels != src.levels)
        throw std::invalid_argument("build_interaction_lists: trees disagree in depth or dimension");
    const int eta = recv.eta;
    std::vector<BlockPairTemplate> out;
    std::vector<std::pair<int, int>> close_prev = {{0, 0}};
    for (int l = 1; l <= recv.levels; ++l) {
        LevelPairs cls = classify_level(recv, src, l, separation);
        auto parent_close = [&](int i, int j) {
            return std::binary_search(close_prev.begin(), close_prev.end(),
                                      std::make_pair(i / eta, j / eta));
        };
        for (auto& [i, j] : cls.close)
            if (!parent_close(i, j))
                throw std::runtime_error(
                    "build_interaction_lists: boxes (" + std::to_string(i) + "," + std::to_string(j) +
                    ") at level " + std::to_string(l) +
                    " are close but their parents are not; closeness is not nested at separation " +
                    std::to_string(separation) + ", increase it");
        BlockPairTemplate t;
        t.level = l;
        for (auto& [i, j] : cls.far)
            if (parent_close(i, j))
                t.pairs.emplace_back(i, j);
        out.push_back(std::move(t));
        close_prev = std::move(cls.close);
    }
    return out;
}

// Size summary of a hierarchical block structure: templates and ranks only,
// no matrix data.
struct H2Skeleton {
    int n = 0;
    int dim = 0;
    int eta = 0;
    int levels = 0;
    int leaf_block = 0;             // B, points per leaf box
    double separation = 0;
    std::vector<int> ranks;         // ranks[l-1] = r_l for levels 1..levels
    BlockPairTemplate close_template;            // leaf level, B x B blocks
    std::vector<BlockPairTemplate> interaction;  // [l-1] = level-l list, r_l x r_l blocks

    int rank_at(int level) const { return ranks.at(level - 1); }
    int boxes_at(int level) const { return int(std::int64_t(1) << (dim * level)); }

    // per-box input rows of the level-l basis: leaf boxes see B points,
    // inner boxes see the eta stacked child coefficient blocks
    int basis_rows(int level) const {
        return level == levels ? leaf_block : eta * rank_at(level + 1);
    }

    // lowest level with a nonempty interaction list; levels+1 if none
    int min_active_level() const {
        for (int l = 1; l <= levels; ++l)
            if (!interaction[l - 1].empty()) return l;
        return levels + 1;
    }

    void validate() const {
        if (levels < 1)
            throw std::runtime_error("H2Skeleton: at least one level below the root is required");
        if (n != leaf_block * boxes_at(levels))
            throw std::runtime_error("H2Skeleton: n does not match leaf_block * boxes");
        if (int(ranks.size()) != levels)
            throw std::runtime_error("H2Skeleton: need one rank per level");
        for (int r : ranks)
            if (r < 1) throw std::runtime_error("H2Skeleton: ranks must be positive");
        if (close_template.level != levels || int(interaction.size()) != levels)
            throw std::runtime_error("H2Skeleton: template levels are inconsistent");
        auto check_tpl = [&](const BlockPairTemplate& t, int size) {
            const int h = boxes_at(t.level);
            if (int(t.row_sizes.size()) != h || int(t.col_sizes.size()) != h)
                throw std::runtime_error("H2Skeleton: template size vectors do not cover the level");
            for (int s : t.row_sizes)
                if (s != size) throw std::runtime_error("H2Skeleton: unexpected block size");
            for (auto& [i, j] : t.pairs)
                if (i < 0 || i >= h || j < 0 || j >= h)
                    throw std::runtime_error("H2Skeleton: pair indexes a box outside the level");
            if (!std::is_sorted(t.pairs.begin(), t.pairs.end()))
                throw std::runtime_error("H2Skeleton: template pairs must be sorted");
        };
        check_tpl(close_template, leaf_block);
        for (int l = 1; l <= levels; ++l) {
            if (interaction[l - 1].level != l)
                throw std::runtime_error("H2Skeleton: interaction list level mismatch");
            check_tpl(interaction[l - 1], rank_at(l));
        }
    }
};

inline H2Skeleton build_skeleton(const ClusterTree& recv, const ClusterTree& src,
                                 double separation, std::vector<int> ranks) {
    if (recv.dim != src.dim || recv.levels != src.levels || recv.size() != src.size() ||
        recv.leaf_block() != src.leaf_block())
        throw std::invalid_argument("build_skeleton: receiver and source trees disagree in shape");
    if (recv.levels < 1)
        throw std::invalid_argument("build_skeleton: tree has no levels below the root; "
                                    "a block hierarchy needs L >= 1 (reduce leaf_size)");
    if (int(ranks.size()) != recv.levels)
        throw std::invalid_argument("build_skeleton: need one rank per level, got " +
                                    std::to_string(ranks.size()) + " for " +
                                    std::to_string(recv.levels) + " levels");
    for (int r : ranks)
        if (r < 1) throw std::invalid_argument("build_skeleton: ranks must be positive");

    H2Skeleton s;
    s.n = recv.size();
    s.dim = recv.dim;
    s.eta = recv.eta;
    s.levels = recv.levels;
    s.leaf_block = recv.leaf_block();
    s.separation = separation;
    s.ranks = std::move(ranks);
    s.interaction = build_interaction_lists(recv, src, separation);
    for (int l = 1; l <= s.levels; ++l) {
        s.interaction[l - 1].row_sizes.assign(s.boxes_at(l), s.rank_at(l));
        s.interaction[l - 1].col_sizes.assign(s.boxes_at(l), s.rank_at(l));
    }
    s.close_template.level = s.levels;
    s.close_template.pairs = classify_level(recv, src, s.levels, separation).close;
    s.close_template.row_sizes.assign(s.boxes_at(s.levels), s.leaf_block);
    s.close_template.col_sizes.assign(s.boxes_at(s.levels), s.leaf_block);
    s.validate();
    return s;
}

inline H2Skeleton build_skeleton(const ClusterTree& recv, const ClusterTree& src,
                                 double separation, int rank) {
    return build_skeleton(recv, src, separation, std::vector<int>(recv.levels, rank));
}

inline H2Skeleton build_skeleton(const ClusterTree& tree, double separation = 1.5, int rank = 8) {
    return build_skeleton(tree, tree, separation, rank);
}

// Skeleton of an n-point tensor grid on the unit cube.
inline H2Skeleton tensor_grid_skeleton(int n, int dim, int leaf_size = 20,
                                       double separation = 1.5, int rank = 8) {
    PointCloud c = uniform_tensor_grid(n, dim);
    ClusterTree t = build_cluster_tree(c, leaf_size);
    return build_skeleton(t, separation, rank);
}

} // namespace h2nn
