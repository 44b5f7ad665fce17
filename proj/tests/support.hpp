#ifndef NNGCD_TESTS_SUPPORT_HPP
#define NNGCD_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "nngcd/nngcd.hpp"

namespace nngcd::oracle {

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    DenseMatrix m(r, c);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

/// Largest number of agreements over every injective relabeling of the
/// predicted ids onto the true ids, found by enumerating permutations.
inline std::size_t brute_force_matches(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    const int kt = *std::max_element(y_true.begin(), y_true.end()) + 1;
    const int kp = *std::max_element(y_pred.begin(), y_pred.end()) + 1;
    const int k = std::max(kt, kp);
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < y_true.size(); ++i) hits += perm[static_cast<std::size_t>(y_pred[i])] == y_true[i];
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Central difference of f along each entry of x; x is restored afterwards.
inline std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> x, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double saved = x[k];
        x[k] = saved + h;
        const double fp = f();
        x[k] = saved - h;
        const double fm = f();
        x[k] = saved;
        g[k] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Worst relative error over entries where either gradient exceeds `floor`.
inline double gradient_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-7) {
    double worst = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        const double a = analytic[k], n = numeric[k];
        if (std::abs(a) <= floor && std::abs(n) <= floor) continue;
        worst = std::max(worst, std::abs(a - n) / std::max(std::abs(a), std::abs(n)));
    }
    return worst;
}

/// Kernel matrix X X^T made exactly symmetric.
inline DenseMatrix gram(const DenseMatrix& X) {
    DenseMatrix A = matmul_nt(X, X);
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = i + 1; j < A.cols(); ++j) A(j, i) = A(i, j);
    return A;
}

}  // namespace nngcd::oracle

#endif  // NNGCD_TESTS_SUPPORT_HPP
