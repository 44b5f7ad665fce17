#ifndef NNGCD_COOCCURRENCE_HPP
#define NNGCD_COOCCURRENCE_HPP

#include <cmath>
#include <optional>
#include <vector>

#include "nngcd/errors.hpp"
#include "nngcd/matrix.hpp"

namespace nngcd {

/// Finite augmentation distribution. kernel(x, n) is the probability that
/// natural sample n produces augmented view x; each column sums to one.
struct AugmentationModel {
    DenseMatrix kernel;  // augmented_count x natural_count
    Vector natural_prior;

    std::size_t augmented_count() const { return kernel.rows(); }
    std::size_t natural_count() const { return kernel.cols(); }

    void validate(double tol = 1e-9) const {
        require(natural_prior.size() == kernel.cols(), "augmentation model: prior length " +
                                                           std::to_string(natural_prior.size()) + " != natural count " +
                                                           std::to_string(kernel.cols()));
        require(kernel.rows() > 0 && kernel.cols() > 0, "augmentation model: empty kernel");
        double prior_total = 0.0;
        for (double p : natural_prior) {
            require(p >= 0.0, "augmentation model: negative prior");
            prior_total += p;
        }
        require(std::abs(prior_total - 1.0) <= tol, "augmentation model: prior does not sum to 1");
        for (std::size_t n = 0; n < kernel.cols(); ++n) {
            double col = 0.0;
            for (std::size_t x = 0; x < kernel.rows(); ++x) {
                require(kernel(x, n) >= 0.0, "augmentation model: negative kernel entry");
                col += kernel(x, n);
            }
            require(std::abs(col - 1.0) <= tol,
                    "augmentation model: kernel column " + std::to_string(n) + " does not sum to 1");
        }
    }
};

struct CooccurrenceGraph {
    DenseMatrix A;     // joint P(x, x')
    Vector marginals;  // P(x)
    DenseMatrix Abar;  // D^{-1/2} A D^{-1/2}
};

/// D^{-1/2} A D^{-1/2} with D the row sums of A.
inline DenseMatrix normalize_adjacency(const DenseMatrix& A) {
    require(A.rows() == A.cols(), "normalize_adjacency: matrix is not square");
    require(max_abs_asymmetry(A) <= 1e-12, "normalize_adjacency: matrix is not symmetric");
    require(min_entry(A) >= 0.0, "normalize_adjacency: negative entry");
    const Vector degree = row_sums(A);
    Vector scale(degree.size());
    for (std::size_t i = 0; i < degree.size(); ++i) {
        require(degree[i] > 0.0, "normalize_adjacency: row " + std::to_string(i) + " is zero");
        scale[i] = 1.0 / std::sqrt(degree[i]);
    }
    DenseMatrix out(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = i; j < A.cols(); ++j) out(i, j) = out(j, i) = scale[i] * A(i, j) * scale[j];
    return out;
}

/// A_{x,x'} = sum_n prior(n) kernel(x,n) kernel(x',n)
inline CooccurrenceGraph build_cooccurrence(const AugmentationModel& model) {
    model.validate();
    const std::size_t N = model.augmented_count();
    CooccurrenceGraph g;
    g.A = DenseMatrix(N, N);
    for (std::size_t n = 0; n < model.natural_count(); ++n) {
        const double p = model.natural_prior[n];
        if (p == 0.0) continue;
        for (std::size_t x = 0; x < N; ++x) {
            const double px = p * model.kernel(x, n);
            if (px == 0.0) continue;
            for (std::size_t y = 0; y < N; ++y) g.A(x, y) += px * model.kernel(y, n);
        }
    }
    for (std::size_t x = 0; x < N; ++x)
        for (std::size_t y = x + 1; y < N; ++y) g.A(x, y) = g.A(y, x) = 0.5 * (g.A(x, y) + g.A(y, x));
    g.marginals = row_sums(g.A);
    g.Abar = normalize_adjacency(g.A);
    return g;
}

/// Entry (i, j) is the cosine similarity of rows i and j.
inline DenseMatrix similarity_matrix(const DenseMatrix& features) {
    Vector norms(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        norms[i] = norm2(features.row(i));
        require(norms[i] > 0.0, "similarity_matrix: row " + std::to_string(i) + " has zero norm");
    }
    DenseMatrix S(features.rows(), features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        S(i, i) = 1.0;
        for (std::size_t j = i + 1; j < features.rows(); ++j)
            S(i, j) = S(j, i) = dot(features.row(i), features.row(j)) / (norms[i] * norms[j]);
    }
    return S;
}

struct BlockDiagnostics {
    std::optional<double> intra_base_sparsity;
    std::optional<double> intra_novel_sparsity;
    std::optional<double> insulation_mean;
};

/// Sparsity: fraction of off-diagonal entries with |value| < threshold inside
/// the base block and inside the novel block. Insulation: mean |value| over
/// the base x novel cross block.
inline BlockDiagnostics block_diagnostics(const DenseMatrix& S, const std::vector<bool>& old_mask,
                                          double threshold = 0.05) {
    require(S.rows() == S.cols(), "block_diagnostics: matrix is not square");
    require(old_mask.size() == S.rows(), "block_diagnostics: mask length does not match matrix");
    const std::size_t n = S.rows();
    double base_small = 0, base_total = 0, novel_small = 0, novel_total = 0, cross_sum = 0, cross_total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = std::abs(S(i, j));
            if (old_mask[i] != old_mask[j]) {
                cross_sum += v;
                cross_total += 1;
            } else if (i != j) {
                const bool small = v < threshold;
                if (old_mask[i]) {
                    base_small += small;
                    base_total += 1;
                } else {
                    novel_small += small;
                    novel_total += 1;
                }
            }
        }
    }
    BlockDiagnostics d;
    if (base_total > 0) d.intra_base_sparsity = base_small / base_total;
    if (novel_total > 0) d.intra_novel_sparsity = novel_small / novel_total;
    if (cross_total > 0) d.insulation_mean = cross_sum / cross_total;
    return d;
}

}  // namespace nngcd

#endif  // NNGCD_COOCCURRENCE_HPP
