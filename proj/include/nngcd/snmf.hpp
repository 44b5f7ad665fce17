#ifndef NNGCD_SNMF_HPP
#define NNGCD_SNMF_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "nngcd/errors.hpp"
#include "nngcd/matrix.hpp"

namespace nngcd {

/// V ~ W H with W (m x k) and H (k x n), both non-negative.
struct FactorPair {
    DenseMatrix W;
    DenseMatrix H;
};

/// V ~ H H^T with H (n x k) non-negative.
struct SymFactor {
    DenseMatrix H;
};

struct SnmfOptions {
    std::size_t max_iters = 5000;
    double tol = 1e-9;
    double damping = 0.5;
    std::uint64_t seed = 0;
};

struct SnmfResult {
    SymFactor factor;
    std::vector<double> objective_history;
    std::size_t iterations = 0;
    bool converged = false;
};

namespace detail {

inline void require_nonnegative(const DenseMatrix& m, const char* what) {
    for (double v : m.values()) require(v >= 0.0, std::string(what) + " has a negative entry");
}

inline void require_symmetric(const DenseMatrix& v) {
    require(v.rows() == v.cols(), "SNMF input must be square");
    require(max_abs_asymmetry(v) <= 1e-10, "SNMF input is not symmetric");
}

}  // namespace detail

inline double nmf_objective(const DenseMatrix& V, const DenseMatrix& W, const DenseMatrix& H) {
    require(W.rows() == V.rows() && H.cols() == V.cols() && W.cols() == H.rows(),
            "nmf_objective: factor shapes do not match V");
    detail::require_nonnegative(V, "V");
    return frobenius_norm_sq(V - matmul(W, H));
}

inline double nmf_objective(const DenseMatrix& V, const FactorPair& f) { return nmf_objective(V, f.W, f.H); }

inline double snmf_objective(const DenseMatrix& V, const DenseMatrix& H) {
    detail::require_symmetric(V);
    detail::require_nonnegative(V, "V");
    require(H.rows() == V.rows(), "snmf_objective: H must have one row per row of V");
    return frobenius_norm_sq(V - matmul_nt(H, H));
}

/// ||H^T H - I||_F: how far the factor is from the orthogonal indicator regime.
inline double orthogonality_residual(const DenseMatrix& H) {
    DenseMatrix g = matmul_tn(H, H);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return std::sqrt(frobenius_norm_sq(g));
}

/// One damped multiplicative step: H <- H o (1 - d + d (V H) / (H H^T H)).
inline DenseMatrix snmf_update_step(const DenseMatrix& V, const DenseMatrix& H, double damping) {
    require(damping > 0.0 && damping <= 1.0, "snmf_update_step: damping must lie in (0, 1]");
    require(V.rows() == V.cols() && H.rows() == V.rows(), "snmf_update_step: shape mismatch");
    constexpr double guard = 1e-12;
    const DenseMatrix numer = matmul(V, H);
    const DenseMatrix denom = matmul(H, matmul_tn(H, H));
    DenseMatrix out = H;
    for (std::size_t i = 0; i < H.rows(); ++i) {
        for (std::size_t j = 0; j < H.cols(); ++j) {
            const double ratio = numer(i, j) / (denom(i, j) + guard);
            out(i, j) = std::max(0.0, H(i, j) * (1.0 - damping + damping * ratio));
        }
    }
    return out;
}

inline DenseMatrix snmf_initial_factor(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.1, 1.0);
    DenseMatrix H(n, k);
    for (double& v : H.values()) v = dist(rng);
    return H;
}

/// Factor a symmetric non-negative V as H H^T. The history starts with the
/// objective at the initialization and gains one entry per accepted step.
/// A step that would raise the objective is retried with halved damping; if
/// no damping helps, the solver stops at the current iterate.
inline SnmfResult snmf_solve(const DenseMatrix& V, std::size_t k, const SnmfOptions& options = {}) {
    detail::require_symmetric(V);
    detail::require_nonnegative(V, "V");
    require(k >= 1, "snmf_solve: rank must be at least 1");
    require(k <= V.rows(), "snmf_solve: rank " + std::to_string(k) + " exceeds matrix size " +
                               std::to_string(V.rows()));

    SnmfResult result;
    DenseMatrix H = snmf_initial_factor(V.rows(), k, options.seed);
    double objective = snmf_objective(V, H);
    result.objective_history.push_back(objective);

    for (std::size_t it = 0; it < options.max_iters; ++it) {
        if (objective == 0.0) {
            result.converged = true;
            break;
        }
        double damping = options.damping;
        DenseMatrix next;
        double next_objective = objective;
        bool accepted = false;
        for (int attempt = 0; attempt < 30; ++attempt, damping *= 0.5) {
            next = snmf_update_step(V, H, damping);
            next_objective = frobenius_norm_sq(V - matmul_nt(next, next));
            if (next_objective <= objective) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            result.converged = true;
            break;
        }
        const double decrease = (objective - next_objective) / std::max(objective, 1e-300);
        H = std::move(next);
        objective = next_objective;
        result.objective_history.push_back(objective);
        ++result.iterations;
        if (decrease < options.tol) {
            result.converged = true;
            break;
        }
    }
    check_finite(H, "snmf_solve");
    result.factor.H = std::move(H);
    return result;
}

/// Cluster id of each row: index of its largest factor entry.
inline std::vector<int> row_argmax(const DenseMatrix& H) {
    std::vector<int> labels(H.rows(), 0);
    for (std::size_t i = 0; i < H.rows(); ++i) {
        auto r = H.row(i);
        labels[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return labels;
}

}  // namespace nngcd

#endif  // NNGCD_SNMF_HPP
