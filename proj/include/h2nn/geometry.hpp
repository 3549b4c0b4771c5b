// Point clouds on tensor grids and the cluster trees over them.
//
// Trees are built by geometric bisection: every box splits into eta = 2^dim
// children per level, so level l holds eta^l congruent boxes. Points are
// required to fill the boxes uniformly (B = N / eta^L points per leaf); that
// is the structure the block skeletons and transfer operators rely on.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace h2nn {

struct PointCloud {
    int dim = 0;
    Eigen::MatrixXd coords;          // one row per point
    std::array<double, 3> lo{0, 0, 0}; // bounding span, [lo, hi) per axis
    std::array<double, 3> hi{0, 0, 0};

    int size() const { return int(coords.rows()); }
};

inline PointCloud uniform_grid_1d(int n, double lo = 0.0, double hi = 1.0) {
    if (n < 2)
        throw std::invalid_argument("uniform_grid_1d: need at least 2 points, got " + std::to_string(n));
    if (!(lo < hi))
        throw std::invalid_argument("uniform_grid_1d: empty span");
    PointCloud c;
    c.dim = 1;
    c.coords.resize(n, 1);
    const double h = (hi - lo) / n;
    for (int i = 0; i < n; ++i)
        c.coords(i, 0) = lo + i * h;
    c.lo = {lo, 0, 0};
    c.hi = {hi, 0, 0};
    return c;
}

// n points arranged as an m^dim tensor grid over [lo,hi)^dim, axis 0 fastest.
inline PointCloud uniform_tensor_grid(int n, int dim, double lo = 0.0, double hi = 1.0) {
    if (dim < 1 || dim > 3)
        throw std::invalid_argument("uniform_tensor_grid: dim must be 1, 2 or 3");
    if (dim == 1)
        return uniform_grid_1d(n, lo, hi);
    if (!(lo < hi))
        throw std::invalid_argument("uniform_tensor_grid: empty span");
    const int m = int(std::llround(std::pow(double(n), 1.0 / dim)));
    long long check = 1;
    for (int a = 0; a < dim; ++a) check *= m;
    if (n < 1 || check != n)
        throw std::invalid_argument("uniform_tensor_grid: n=" + std::to_string(n) +
                                    " is not a perfect " + std::to_string(dim) + "-th power");
    PointCloud c;
    c.dim = dim;
    c.coords.resize(n, dim);
    const double h = (hi - lo) / m;
    for (int p = 0; p < n; ++p) {
        int rest = p;
        for (int a = 0; a < dim; ++a) {
            c.coords(p, a) = lo + (rest % m) * h;
            rest /= m;
        }
    }
    for (int a = 0; a < dim; ++a) {
        c.lo[a] = lo;
        c.hi[a] = hi;
    }
    return c;
}

// Index map from original point order to tree (leaf-concatenated) order:
// position perm[i] of the reordered sequence holds original element i.
class Permutation {
public:
    Permutation() = default;

    explicit Permutation(std::vector<int> to_tree) : to_tree_(std::move(to_tree)) {
        std::vector<char> seen(to_tree_.size(), 0);
        for (int p : to_tree_) {
            if (p < 0 || p >= int(to_tree_.size()) || seen[p])
                throw std::invalid_argument("Permutation: image is not a permutation");
            seen[p] = 1;
        }
    }

    static Permutation identity(int n) {
        std::vector<int> v(n);
        std::iota(v.begin(), v.end(), 0);
        return Permutation(std::move(v));
    }

    int size() const { return int(to_tree_.size()); }
    int operator[](int i) const { return to_tree_[i]; }

    bool is_identity() const {
        for (int i = 0; i < size(); ++i)
            if (to_tree_[i] != i) return false;
        return true;
    }

    const std::vector<int>& raw() const { return to_tree_; }

private:
    std::vector<int> to_tree_;
};

inline void check_perm_length(int have, int want, const char* who) {
    if (have != want)
        throw std::invalid_argument(std::string(who) + ": length " + std::to_string(have) +
                                    " does not match permutation size " + std::to_string(want));
}

inline Eigen::VectorXd apply_permutation(const Eigen::VectorXd& v, const Permutation& p) {
    check_perm_length(int(v.size()), p.size(), "apply_permutation");
    Eigen::VectorXd out(v.size());
    for (int i = 0; i < p.size(); ++i)
        out[p[i]] = v[i];
    return out;
}

inline Eigen::VectorXd apply_inverse_permutation(const Eigen::VectorXd& v, const Permutation& p) {
    check_perm_length(int(v.size()), p.size(), "apply_inverse_permutation");
    Eigen::VectorXd out(v.size());
    for (int i = 0; i < p.size(); ++i)
        out[i] = v[p[i]];
    return out;
}

// columns are samples; rows get reordered
inline Eigen::MatrixXd apply_permutation_rows(const Eigen::MatrixXd& m, const Permutation& p) {
    check_perm_length(int(m.rows()), p.size(), "apply_permutation_rows");
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (int i = 0; i < p.size(); ++i)
        out.row(p[i]) = m.row(i);
    return out;
}

// A_perm(p[i], p[j]) = A(i, j): conjugate a kernel matrix into tree order
inline Eigen::MatrixXd apply_permutation_symmetric(const Eigen::MatrixXd& a, const Permutation& p) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("apply_permutation_symmetric: matrix is not square");
    check_perm_length(int(a.rows()), p.size(), "apply_permutation_symmetric");
    Eigen::MatrixXd out(a.rows(), a.cols());
    for (int i = 0; i < p.size(); ++i)
        for (int j = 0; j < p.size(); ++j)
            out(p[i], p[j]) = a(i, j);
    return out;
}

inline PointCloud apply_permutation(const PointCloud& c, const Permutation& p) {
    PointCloud out = c;
    out.coords = apply_permutation_rows(c.coords, p);
    return out;
}

struct Box {
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{0, 0, 0};
    int begin = 0; // first point (tree order)
    int count = 0;

    double center(int axis) const { return 0.5 * (lo[axis] + hi[axis]); }
};

struct TreeLevel {
    double width = 0; // full box edge length (max over axes), shared by the level
    std::vector<Box> boxes;
};

struct ClusterTree {
    int dim = 0;
    int eta = 0;    // children per box, 2^dim
    int levels = 0; // depth L; level 0 is the root
    std::vector<TreeLevel> level; // size levels + 1
    Permutation perm;             // original -> tree order

    int size() const { return level.empty() ? 0 : level[0].boxes[0].count; }
    int boxes_at(int l) const { return int(level[l].boxes.size()); }
    int leaf_block() const { return level[levels].boxes[0].count; }

    double center_distance(int l, int i, int j) const {
        const Box& a = level[l].boxes[i];
        const Box& b = level[l].boxes[j];
        double s = 0;
        for (int ax = 0; ax < dim; ++ax) {
            double d = a.center(ax) - b.center(ax);
            s += d * d;
        }
        return std::sqrt(s);
    }
};

namespace detail {

inline void bisect(const Eigen::MatrixXd& coords, std::vector<int>& idx,
                   int begin, int end, int depth, int max_depth, int dim,
                   const std::array<double, 3>& lo, const std::array<double, 3>& hi,
                   std::vector<TreeLevel>& levels) {
    Box box;
    box.lo = lo;
    box.hi = hi;
    box.begin = begin;
    box.count = end - begin;
    levels[depth].boxes.push_back(box);
    if (depth == max_depth)
        return;

    std::array<double, 3> mid{0, 0, 0};
    for (int a = 0; a < dim; ++a)
        mid[a] = 0.5 * (lo[a] + hi[a]);

    const int eta = 1 << dim;
    // child id: bit a set iff coordinate a is in the upper half
    auto child_of = [&](int p) {
        int c = 0;
        for (int a = 0; a < dim; ++a)
            if (coords(p, a) >= mid[a]) c |= 1 << a;
        return c;
    };

    // stable counting sort of idx[begin,end) by child id
    std::array<int, 8> count{};
    for (int k = begin; k < end; ++k)
        count[child_of(idx[k])]++;
    std::array<int, 8> offset{};
    int run = begin;
    for (int c = 0; c < eta; ++c) {
        offset[c] = run;
        run += count[c];
    }
    {
        std::vector<int> tmp(idx.begin() + begin, idx.begin() + end);
        std::array<int, 8> cursor = offset;
        for (int p : tmp)
            idx[cursor[child_of(p)]++] = p;
    }

    const int expect = (end - begin) / eta;
    for (int c = 0; c < eta; ++c) {
        if (count[c] != expect)
            throw std::invalid_argument(
                "build_cluster_tree: bisection at depth " + std::to_string(depth + 1) +
                " produced a box with " + std::to_string(count[c]) + " points where " +
                std::to_string(expect) + " were expected; the cloud is not a uniform tensor grid");
        std::array<double, 3> clo = lo, chi = hi;
        for (int a = 0; a < dim; ++a) {
            if (c & (1 << a)) clo[a] = mid[a];
            else              chi[a] = mid[a];
        }
        bisect(coords, idx, offset[c], offset[c] + count[c], depth + 1, max_depth, dim, clo, chi, levels);
    }
}

} // namespace detail

// Partition a cloud into the shallowest eta-ary tree whose leaves hold at
// most leaf_size points. N must factor as B * eta^L with B <= leaf_size.
inline ClusterTree build_cluster_tree(const PointCloud& cloud, int leaf_size = 20) {
    const int n = cloud.size();
    if (cloud.dim < 1 || cloud.dim > 3)
        throw std::invalid_argument("build_cluster_tree: dim must be 1, 2 or 3");
    if (n < 1)
        throw std::invalid_argument("build_cluster_tree: empty cloud");
    if (leaf_size < 1)
        throw std::invalid_argument("build_cluster_tree: leaf_size must be positive");

    const int eta = 1 << cloud.dim;
    int depth = -1;
    std::int64_t boxes = 1;
    for (int l = 0; boxes <= n; ++l, boxes *= eta) {
        if (n % boxes == 0 && n / boxes <= leaf_size) {
            depth = l;
            break;
        }
    }
    if (depth < 0)
        throw std::invalid_argument(
            "build_cluster_tree: N=" + std::to_string(n) + " cannot be split into boxes of at most " +
            std::to_string(leaf_size) + " points; N must have the form B * " + std::to_string(eta) +
            "^L with B <= " + std::to_string(leaf_size));

    ClusterTree t;
    t.dim = cloud.dim;
    t.eta = eta;
    t.levels = depth;
    t.level.resize(depth + 1);

    double root_width = 0;
    for (int a = 0; a < cloud.dim; ++a)
        root_width = std::max(root_width, cloud.hi[a] - cloud.lo[a]);
    if (!(root_width > 0))
        throw std::invalid_argument("build_cluster_tree: cloud has an empty bounding span");
    for (int l = 0; l <= depth; ++l) {
        t.level[l].width = std::ldexp(root_width, -l);
        t.level[l].boxes.reserve(std::size_t(1) << (cloud.dim * l));
    }

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    detail::bisect(cloud.coords, idx, 0, n, 0, depth, cloud.dim, cloud.lo, cloud.hi, t.level);

    std::vector<int> to_tree(n);
    for (int pos = 0; pos < n; ++pos)
        to_tree[idx[pos]] = pos;
    t.perm = Permutation(std::move(to_tree));
    return t;
}

} // namespace h2nn
