// Paired (q, A q) sample generation for the two benchmark operators, plus
// the train/validation split. Targets are exact dense products; any
// compression error in the model under training is never baked into data.
#pragma once

#include "rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace h2nn {

enum class Kernel { custom_operator, inverse_distance };

inline std::string kernel_name(Kernel k) {
    switch (k) {
    case Kernel::custom_operator: return "custom-operator";
    case Kernel::inverse_distance: return "inverse-distance";
    }
    throw std::invalid_argument("kernel_name: unknown kernel");
}

inline Kernel kernel_from_name(const std::string& name) {
    if (name == "custom-operator") return Kernel::custom_operator;
    if (name == "inverse-distance") return Kernel::inverse_distance;
    throw std::invalid_argument("kernel_from_name: unknown kernel '" + name +
                                "' (expected custom-operator or inverse-distance)");
}

// a_ij = (i+j)^2 / (n^5 |i-j|) on integer grid indices, zero diagonal.
// Symmetric but not Toeplitz, so it is not representable by a convolution.
inline Eigen::MatrixXd custom_operator_matrix(int n) {
    if (n < 2)
        throw std::invalid_argument("custom_operator_matrix: need n >= 2, got " + std::to_string(n));
    const double scale = std::pow(double(n), 5);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j)
                a(i, j) = double(i + j) * double(i + j) / (scale * std::abs(i - j));
    return a;
}

// a_ij = 1 / |i-j| on a unit-spaced grid, zero diagonal
inline Eigen::MatrixXd nbody_matrix(int n) {
    if (n < 2)
        throw std::invalid_argument("nbody_matrix: need n >= 2, got " + std::to_string(n));
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j)
                a(i, j) = 1.0 / std::abs(i - j);
    return a;
}

inline Eigen::MatrixXd kernel_matrix(Kernel k, int n) {
    return k == Kernel::custom_operator ? custom_operator_matrix(n) : nbody_matrix(n);
}

// Smooth nonnegative random fields, one sample per column:
//   q(x) = sum_{k=0}^{8} c_k cos(2 pi k x + phi_k),  x = i/n,
// with c_k uniform in [0, 1/(k+1)] and phi_k uniform in [0, 2 pi), then each
// column shifted so its minimum is zero. Sample s draws from an rng seeded
// with seed + s, so serial and parallel generation agree exactly.
inline Eigen::MatrixXd gen_inputs(int n, int count, std::uint64_t seed) {
    if (n < 1 || count < 1)
        throw std::invalid_argument("gen_inputs: need n >= 1 and count >= 1");
    constexpr int modes = 9;
    const double two_pi = 2.0 * std::acos(-1.0);
    Eigen::MatrixXd q(n, count);
    for (int s = 0; s < count; ++s) {
        Rng rng(seed + std::uint64_t(s));
        double c[modes], phi[modes];
        for (int k = 0; k < modes; ++k) {
            c[k] = rng.uniform() / double(k + 1);
            phi[k] = rng.uniform(0.0, two_pi);
        }
        for (int i = 0; i < n; ++i) {
            double v = 0;
            for (int k = 0; k < modes; ++k)
                v += c[k] * std::cos(two_pi * k * double(i) / double(n) + phi[k]);
            q(i, s) = v;
        }
        q.col(s).array() -= q.col(s).minCoeff();
    }
    return q;
}

struct Dataset {
    Kernel kernel = Kernel::custom_operator;
    int n = 0;
    std::uint64_t seed = 0;
    Eigen::MatrixXd inputs;  // n x samples
    Eigen::MatrixXd targets; // n x samples, exactly A * inputs

    int sample_count() const { return int(inputs.cols()); }
};

inline Dataset make_dataset(Kernel kernel, int n, int count, std::uint64_t seed) {
    Dataset ds;
    ds.kernel = kernel;
    ds.n = n;
    ds.seed = seed;
    ds.inputs = gen_inputs(n, count, seed);
    // one matvec per sample (not a single gemm): keeps each target bitwise
    // reproducible by an independent per-sample recomputation
    Eigen::MatrixXd a = kernel_matrix(kernel, n);
    ds.targets.resize(n, count);
    for (int s = 0; s < count; ++s)
        ds.targets.col(s) = a * ds.inputs.col(s);
    return ds;
}

// Leading share goes to training, the rest to validation; counts follow
// train = floor(samples * a / (a + b)). Samples are i.i.d. by construction,
// so a contiguous split is as good as a shuffled one and stays reproducible.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, int train_share, int val_share) {
    if (train_share < 1 || val_share < 1)
        throw std::invalid_argument("split: both shares must be positive");
    const int total = ds.sample_count();
    const int train = int(std::int64_t(total) * train_share / (train_share + val_share));
    const int val = total - train;
    if (train < 1 || val < 1)
        throw std::invalid_argument("split: ratio " + std::to_string(train_share) + ":" +
                                    std::to_string(val_share) + " leaves an empty part for " +
                                    std::to_string(total) + " samples");
    Dataset a{ds.kernel, ds.n, ds.seed, ds.inputs.leftCols(train), ds.targets.leftCols(train)};
    Dataset b{ds.kernel, ds.n, ds.seed, ds.inputs.rightCols(val), ds.targets.rightCols(val)};
    return {std::move(a), std::move(b)};
}

} // namespace h2nn
