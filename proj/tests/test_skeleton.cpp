#include <h2nn/skeleton.hpp>
#include <h2nn/rng.hpp>

#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace h2nn;

namespace {

ClusterTree grid_tree_1d(int n, int leaf) {
    return build_cluster_tree(uniform_grid_1d(n, 0.0, 1.0), leaf);
}

} // namespace

TEST_CASE("close pairs at the default separation are the |i-j|<=1 band") {
    ClusterTree t = grid_tree_1d(8, 2); // H_2 = 4
    LevelPairs lp = classify_level(t, t, 2, 1.5);
    REQUIRE(lp.close.size() + lp.far.size() == 16);
    CHECK(lp.close.size() == 10); // 4 diagonal + 6 adjacent
    for (auto& [i, j] : lp.close)
        CHECK(std::abs(i - j) <= 1);
    for (auto& [i, j] : lp.far)
        CHECK(std::abs(i - j) >= 2);
}

TEST_CASE("vanishing separation keeps only self pairs close") {
    ClusterTree t = grid_tree_1d(8, 2);
    LevelPairs lp = classify_level(t, t, 2, 1e-9);
    REQUIRE(lp.close.size() == 4);
    for (auto& [i, j] : lp.close)
        CHECK(i == j);
    CHECK_THROWS_AS(classify_level(t, t, 3, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(classify_level(t, t, 2, 0.0), std::invalid_argument);
}

TEST_CASE("2d corner box sees a 4-partner neighborhood") {
    // 8x8 grid, leaves of 4 -> 16 leaf boxes in a 4x4 arrangement
    ClusterTree t = build_cluster_tree(uniform_tensor_grid(64, 2), 4);
    REQUIRE(t.levels == 2);
    LevelPairs lp = classify_level(t, t, 2, 1.5);
    int corner_partners = 0;
    for (auto& [i, j] : lp.close)
        if (i == 0) corner_partners++;
    CHECK(corner_partners == 4); // itself, two edge neighbors, one diagonal
}

TEST_CASE("interaction lists over two levels match the hand enumeration") {
    ClusterTree t = grid_tree_1d(8, 2);
    auto lists = build_interaction_lists(t, t, 1.5);
    REQUIRE(lists.size() == 2);
    CHECK(lists[0].empty()); // H_1 = 2, no far pairs
    // level 2: far (|i-j| >= 2) with adjacent parents -> all six far pairs
    std::vector<std::pair<int, int>> expect = {{0, 2}, {0, 3}, {1, 3}, {2, 0}, {3, 0}, {3, 1}};
    CHECK(lists[1].pairs == expect);
}

TEST_CASE("with only self pairs close, level one absorbs every far pair") {
    // 4x4 grid, one level of 4 boxes; tiny separation -> only (i,i) close
    ClusterTree t = build_cluster_tree(uniform_tensor_grid(16, 2), 4);
    REQUIRE(t.levels == 1);
    auto lists = build_interaction_lists(t, t, 0.1);
    REQUIRE(lists.size() == 1);
    CHECK(lists[0].pair_count() == 12); // all off-diagonal pairs
}

TEST_CASE("skeleton of the 320-point grid") {
    H2Skeleton s = tensor_grid_skeleton(320, 1);
    CHECK(s.levels == 4);
    CHECK(s.leaf_block == 20);
    CHECK(s.eta == 2);
    CHECK(s.boxes_at(4) == 16);
    CHECK(s.close_template.pair_count() == 46); // 16 + 2*15 neighbor band
    CHECK(s.rank_at(1) == 8);
    CHECK(testing::skeletons_equal(s, tensor_grid_skeleton(320, 1)));
    CHECK(testing::check_tiling(s).empty());

    // identical to building from the explicit grid
    ClusterTree t = grid_tree_1d(320, 20);
    H2Skeleton s2 = build_skeleton(t, 1.5, 8);
    CHECK(testing::skeletons_equal(s, s2));
}

TEST_CASE("degenerate hierarchies are rejected") {
    ClusterTree t = build_cluster_tree(uniform_grid_1d(16, 0.0, 1.0), 20); // L = 0
    CHECK_THROWS_WITH(build_skeleton(t, 1.5, 8),
                      Catch::Matchers::ContainsSubstring("L >= 1"));
    CHECK_THROWS_AS(tensor_grid_skeleton(6, 1, 2), std::invalid_argument);
    CHECK_THROWS_AS(build_skeleton(t, t, 1.5, std::vector<int>{3, 4}), std::invalid_argument);
}

TEST_CASE("tensor grid skeleton in 2d") {
    H2Skeleton s = tensor_grid_skeleton(64, 2, 4);
    CHECK(s.eta == 4);
    CHECK(s.levels == 2);
    CHECK(s.leaf_block == 4);
    CHECK(testing::check_tiling(s).empty());
}

TEST_CASE("skeleton properties over random configurations") {
    Rng rng(2026);
    struct Cfg { int n, dim, leaf; };
    const std::vector<Cfg> cfgs = {
        {64, 1, 2}, {64, 1, 4}, {128, 1, 8}, {256, 1, 4}, {256, 1, 16},
        {160, 1, 5}, {192, 1, 3}, {64, 2, 4}, {256, 2, 4}, {144, 2, 9},
    };
    for (const Cfg& cfg : cfgs) {
        // stay in the regime where closeness nests (separation >= sqrt(dim))
        const double lo_sep = cfg.dim == 1 ? 1.0 : 1.45;
        const double sep = lo_sep + (3.0 - lo_sep) * rng.uniform();
        CAPTURE(cfg.n, cfg.dim, cfg.leaf, sep);
        ClusterTree t = build_cluster_tree(uniform_tensor_grid(cfg.n, cfg.dim), cfg.leaf);
        H2Skeleton s = build_skeleton(t, sep, 2);

        CHECK(testing::check_tiling(s).empty());

        for (int l = 1; l <= t.levels; ++l) {
            LevelPairs lp = classify_level(t, t, l, sep);
            // symmetry for x = y
            for (auto& [i, j] : lp.close)
                CHECK(std::binary_search(lp.close.begin(), lp.close.end(), std::make_pair(j, i)));
            // monotonicity: wider separation only grows the close set
            LevelPairs wider = classify_level(t, t, l, sep * 1.3);
            for (auto& [i, j] : lp.close)
                CHECK(std::binary_search(wider.close.begin(), wider.close.end(), std::make_pair(i, j)));
            // parent closure for interaction pairs
            if (l >= 2) {
                LevelPairs up = classify_level(t, t, l - 1, sep);
                for (auto& [i, j] : s.interaction[l - 1].pairs)
                    CHECK(std::binary_search(up.close.begin(), up.close.end(),
                                             std::make_pair(i / t.eta, j / t.eta)));
            }
        }
    }
}
