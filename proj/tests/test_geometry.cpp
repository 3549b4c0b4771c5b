#include <h2nn/geometry.hpp>
#include <h2nn/rng.hpp>

#include <catch2/catch_amalgamated.hpp>

using namespace h2nn;

TEST_CASE("uniform 1d grids are equispaced and sorted") {
    PointCloud c = uniform_grid_1d(4, 0.0, 1.0);
    REQUIRE(c.size() == 4);
    REQUIRE(c.dim == 1);
    CHECK(c.coords(0, 0) == 0.0);
    CHECK(c.coords(1, 0) == 0.25);
    CHECK(c.coords(2, 0) == 0.5);
    CHECK(c.coords(3, 0) == 0.75);

    PointCloud c2 = uniform_grid_1d(2, 0.0, 1.0);
    CHECK(c2.coords(0, 0) == 0.0);
    CHECK(c2.coords(1, 0) == 0.5);

    PointCloud c3 = uniform_grid_1d(4, 2.0, 6.0);
    for (int i = 0; i < 4; ++i)
        CHECK(c3.coords(i, 0) == 2.0 + i);

    CHECK_THROWS_AS(uniform_grid_1d(1, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(uniform_grid_1d(4, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("tensor grids require perfect powers") {
    PointCloud c = uniform_tensor_grid(9, 2);
    REQUIRE(c.size() == 9);
    // axis 0 fastest
    CHECK(c.coords(1, 0) == Catch::Approx(1.0 / 3));
    CHECK(c.coords(1, 1) == 0.0);
    CHECK(c.coords(3, 1) == Catch::Approx(1.0 / 3));
    CHECK_THROWS_AS(uniform_tensor_grid(10, 2), std::invalid_argument);
    CHECK_THROWS_AS(uniform_tensor_grid(9, 4), std::invalid_argument);
}

TEST_CASE("cluster tree over 1d grid of 8, leaves of 2") {
    ClusterTree t = build_cluster_tree(uniform_grid_1d(8, 0.0, 1.0), 2);
    REQUIRE(t.levels == 2);
    REQUIRE(t.eta == 2);
    REQUIRE(t.boxes_at(0) == 1);
    REQUIRE(t.boxes_at(1) == 2);
    REQUIRE(t.boxes_at(2) == 4);
    for (int b = 0; b < 4; ++b) {
        CHECK(t.level[2].boxes[b].begin == 2 * b);
        CHECK(t.level[2].boxes[b].count == 2);
    }
    CHECK(t.perm.is_identity());
    CHECK(t.level[0].width == 1.0);
    CHECK(t.level[1].width == 0.5);
    CHECK(t.level[2].width == 0.25);
    CHECK(t.leaf_block() == 2);
}

TEST_CASE("cluster tree over a 4x4 grid uses depth-first quadrant order") {
    PointCloud c = uniform_tensor_grid(16, 2);
    ClusterTree t = build_cluster_tree(c, 4);
    REQUIRE(t.eta == 4);
    REQUIRE(t.levels == 1);
    REQUIRE(t.boxes_at(1) == 4);

    // oracle: quadrant membership by coordinate comparison, child id bit a
    // set when coordinate a is in the upper half
    std::vector<std::vector<int>> expect(4);
    for (int p = 0; p < 16; ++p) {
        int id = (c.coords(p, 0) >= 0.5 ? 1 : 0) | (c.coords(p, 1) >= 0.5 ? 2 : 0);
        expect[id].push_back(p);
    }
    for (int b = 0; b < 4; ++b) {
        const Box& box = t.level[1].boxes[b];
        REQUIRE(box.count == 4);
        for (int k = 0; k < 4; ++k) {
            int orig = expect[b][k]; // ascending original order within a box
            CHECK(t.perm[orig] == box.begin + k);
        }
    }
}

TEST_CASE("indivisible point counts are rejected") {
    CHECK_THROWS_WITH(build_cluster_tree(uniform_grid_1d(6, 0.0, 1.0), 2),
                      Catch::Matchers::ContainsSubstring("B * 2^L"));
    // degenerate cloud: all mass in one half, boxes cannot be uniform
    PointCloud c = uniform_grid_1d(8, 0.0, 1.0);
    c.coords.setConstant(0.1);
    CHECK_THROWS_WITH(build_cluster_tree(c, 2),
                      Catch::Matchers::ContainsSubstring("uniform tensor grid"));
}

TEST_CASE("permutation application and inversion") {
    Permutation p(std::vector<int>{2, 0, 1});
    Eigen::VectorXd v(3);
    v << 1, 2, 3; // [a,b,c]
    Eigen::VectorXd w = apply_permutation(v, p);
    CHECK(w[0] == 2); // [b,c,a]
    CHECK(w[1] == 3);
    CHECK(w[2] == 1);
    Eigen::VectorXd back = apply_inverse_permutation(w, p);
    CHECK(back.isApprox(v));

    CHECK(apply_permutation(v, Permutation::identity(3)).isApprox(v));
    CHECK_THROWS_AS(apply_permutation(Eigen::VectorXd::Zero(4), p), std::invalid_argument);
    CHECK_THROWS_AS(Permutation(std::vector<int>{0, 0, 1}), std::invalid_argument);

    Eigen::MatrixXd a(3, 3);
    a << 11, 12, 13, 21, 22, 23, 31, 32, 33;
    Eigen::MatrixXd ap = apply_permutation_symmetric(a, p);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(ap(p[i], p[j]) == a(i, j));
}

TEST_CASE("tree invariants across sizes and dimensions") {
    struct Cfg { int n, dim, leaf; };
    for (Cfg cfg : {Cfg{8, 1, 2}, Cfg{64, 1, 20}, Cfg{320, 1, 20}, Cfg{64, 2, 4}, Cfg{64, 3, 8}}) {
        CAPTURE(cfg.n, cfg.dim, cfg.leaf);
        PointCloud c = uniform_tensor_grid(cfg.n, cfg.dim);
        ClusterTree t = build_cluster_tree(c, cfg.leaf);
        REQUIRE(t.size() == cfg.n);
        for (int l = 0; l <= t.levels; ++l) {
            REQUIRE(t.boxes_at(l) == std::int64_t(1) << (cfg.dim * l));
            int pos = 0;
            for (const Box& b : t.level[l].boxes) {
                CHECK(b.begin == pos); // contiguous depth-first ranges
                pos += b.count;
                CHECK(b.count == cfg.n / t.boxes_at(l));
            }
            CHECK(pos == cfg.n);
            if (l > 0)
                CHECK(t.level[l].width == Catch::Approx(t.level[l - 1].width / 2));
        }
        // every point sits inside its box at every level
        for (int orig = 0; orig < cfg.n; ++orig) {
            int pos = t.perm[orig];
            for (int l = 0; l <= t.levels; ++l) {
                const Box& b = t.level[l].boxes[pos / (cfg.n / t.boxes_at(l))];
                for (int ax = 0; ax < cfg.dim; ++ax) {
                    CHECK(c.coords(orig, ax) >= b.lo[ax]);
                    CHECK(c.coords(orig, ax) <= b.hi[ax]);
                }
            }
        }
    }
}

TEST_CASE("sorted 1d input keeps the identity permutation, shuffled input does not") {
    PointCloud sorted = uniform_grid_1d(64, 0.0, 1.0);
    CHECK(build_cluster_tree(sorted, 4).perm.is_identity());

    // same points, shuffled rows: tree must land on the same leaf geometry
    Rng rng(7);
    std::vector<int> order(64);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    PointCloud mixed = sorted;
    for (int i = 0; i < 64; ++i)
        mixed.coords.row(i) = sorted.coords.row(order[i]);
    ClusterTree t = build_cluster_tree(mixed, 4);
    CHECK_FALSE(t.perm.is_identity());
    for (int i = 0; i < 64; ++i)
        CHECK(t.perm[i] / 4 == order[i] / 4); // geometric box = sorted rank's box
    for (int i = 0; i < 64; ++i)
        for (int j = i + 1; j < 64; ++j)
            if (order[i] / 4 == order[j] / 4)
                CHECK(t.perm[i] < t.perm[j]); // stable within a box
}
