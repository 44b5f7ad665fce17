#ifndef NNGCD_VERIFY_HPP
#define NNGCD_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nngcd/clustering.hpp"
#include "nngcd/cooccurrence.hpp"
#include "nngcd/errors.hpp"
#include "nngcd/losses.hpp"
#include "nngcd/matrix.hpp"
#include "nngcd/snmf.hpp"

namespace nngcd {

// ---------------------------------------------------------------------------
// Kernel K-means <-> SNMF

struct Theorem1Report {
    std::size_t n = 0;
    std::size_t K = 0;
    std::size_t trials = 0;
    double max_decomposition_residual = 0.0;
    double max_expansion_residual = 0.0;
    double block_agreement = 0.0;  // fraction of samples on which the two partitions agree
    double kernel_kmeans_block_loss = 0.0;
    double snmf_final_objective = 0.0;
    double snmf_orthogonality_residual = 0.0;
    bool passed = false;
};

/// K blocks of near-equal size, weight 1 inside a block and 0 across.
inline DenseMatrix block_kernel(std::size_t n, std::size_t K, std::vector<int>* labels = nullptr) {
    require(K >= 1 && K <= n, "block_kernel: need 1 <= K <= n");
    std::vector<int> lab(n);
    for (std::size_t i = 0; i < n; ++i) lab[i] = static_cast<int>(i * K / n);
    DenseMatrix A(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) A(i, j) = lab[i] == lab[j] ? 1.0 : 0.0;
    if (labels) *labels = lab;
    return A;
}

/// A = X X^T with X uniform on [0, 1): symmetric, PSD and non-negative.
inline DenseMatrix random_psd_nonnegative(std::size_t n, std::size_t rank, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    DenseMatrix X(n, rank);
    for (double& v : X.values()) v = dist(rng);
    DenseMatrix A = matmul_nt(X, X);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) A(j, i) = A(i, j);
    return A;
}

/// Random assignment with every cluster non-empty.
inline ClusterAssignment random_assignment(std::size_t n, std::size_t K, std::mt19937_64& rng) {
    require(K >= 1 && K <= n, "random_assignment: need 1 <= K <= n");
    std::vector<int> labels(n);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(K) - 1);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < K ? static_cast<int>(i) : pick(rng);
    std::shuffle(labels.begin(), labels.end(), rng);
    return {labels, K};
}

inline Theorem1Report verify_theorem1(std::size_t n, std::size_t K, std::uint64_t seed, std::size_t trials = 100) {
    require(K >= 1 && n >= K, "verify theorem1: need n >= K >= 1");
    Theorem1Report rep;
    rep.n = n;
    rep.K = K;
    rep.trials = trials;
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        const DenseMatrix A = random_psd_nonnegative(n, std::max<std::size_t>(K, 3), rng);
        const ClusterAssignment a = random_assignment(n, K, rng);
        const DenseMatrix H = indicator_matrix(a);
        const double tr_hah = trace(matmul_tn(H, matmul(A, H)));
        rep.max_decomposition_residual =
            std::max(rep.max_decomposition_residual, std::abs(kernel_kmeans_loss(A, a) - (trace(A) - tr_hah)));
        const double lhs = frobenius_norm_sq(A - matmul_nt(H, H));
        const double rhs = frobenius_norm_sq(A) - 2.0 * tr_hah + frobenius_norm_sq(matmul_tn(H, H));
        rep.max_expansion_residual = std::max(rep.max_expansion_residual, std::abs(lhs - rhs));
    }

    const DenseMatrix B = block_kernel(n, K);
    const auto kkm = kernel_kmeans(B, K, 10, seed);
    SnmfOptions opts;
    opts.seed = seed;
    const auto sn = snmf_solve(B, K, opts);
    const auto snmf_labels = row_argmax(sn.factor.H);
    rep.block_agreement =
        static_cast<double>(hungarian_match(kkm.assignment.labels, snmf_labels).matches) / static_cast<double>(n);
    rep.kernel_kmeans_block_loss = kkm.loss;
    rep.snmf_final_objective = sn.objective_history.back();
    rep.snmf_orthogonality_residual = orthogonality_residual(sn.factor.H);
    rep.passed = rep.max_decomposition_residual < 1e-10 && rep.max_expansion_residual < 1e-9 &&
                 rep.block_agreement == 1.0;
    return rep;
}

inline nlohmann::json to_json(const Theorem1Report& r) {
    return {{"n", r.n},
            {"K", r.K},
            {"trials", r.trials},
            {"max_decomposition_residual", r.max_decomposition_residual},
            {"max_expansion_residual", r.max_expansion_residual},
            {"block_agreement", r.block_agreement},
            {"kernel_kmeans_block_loss", r.kernel_kmeans_block_loss},
            {"snmf_final_objective", r.snmf_final_objective},
            {"snmf_orthogonality_residual", r.snmf_orthogonality_residual},
            {"passed", r.passed}};
}

// ---------------------------------------------------------------------------
// SNMF on Abar <-> NCL

/// One natural sample with two equally likely views.
inline AugmentationModel uniform_pair_model() {
    return {DenseMatrix{{0.5}, {0.5}}, Vector{1.0}};
}

/// n augmented views split into two halves, one natural sample per view.
/// Natural j puts weight p_in on views of its own half and p_out on the
/// other half, normalized to a distribution.
inline AugmentationModel two_block_model(std::size_t n, double p_in, double p_out) {
    require(n >= 2, "two-block: need at least two nodes");
    require(p_in >= 0.0 && p_out >= 0.0 && p_in + p_out > 0.0, "two-block: weights must be non-negative");
    AugmentationModel m;
    m.kernel = DenseMatrix(n, n);
    m.natural_prior.assign(n, 1.0 / static_cast<double>(n));
    const std::size_t half = n / 2;
    for (std::size_t j = 0; j < n; ++j) {
        double col = 0.0;
        for (std::size_t x = 0; x < n; ++x) {
            m.kernel(x, j) = (x < half) == (j < half) ? p_in : p_out;
            col += m.kernel(x, j);
        }
        require(col > 0.0, "two-block: natural sample with no views");
        for (std::size_t x = 0; x < n; ++x) m.kernel(x, j) /= col;
    }
    return m;
}

/// Random dense kernel and prior; every view reachable.
inline AugmentationModel random_model(std::size_t augmented, std::size_t natural, std::uint64_t seed) {
    require(augmented >= 1 && natural >= 1, "random model: counts must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.05, 1.0);
    AugmentationModel m;
    m.kernel = DenseMatrix(augmented, natural);
    for (std::size_t j = 0; j < natural; ++j) {
        double col = 0.0;
        for (std::size_t x = 0; x < augmented; ++x) col += m.kernel(x, j) = dist(rng);
        for (std::size_t x = 0; x < augmented; ++x) m.kernel(x, j) /= col;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < natural; ++j) {
        m.natural_prior.push_back(dist(rng));
        total += m.natural_prior.back();
    }
    for (double& p : m.natural_prior) p /= total;
    return m;
}

/// Presets: "uniform-pair", "two-block(n, p_in, p_out)", "random(n_aug, n_nat, seed)".
inline AugmentationModel parse_graph_preset(const std::string& preset) {
    static const std::regex two_block(R"(\s*two-block\(\s*(\d+)\s*,\s*([0-9.eE+-]+)\s*,\s*([0-9.eE+-]+)\s*\)\s*)");
    static const std::regex random(R"(\s*random\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)\s*)");
    std::smatch m;
    if (preset == "uniform-pair") return uniform_pair_model();
    try {
        if (std::regex_match(preset, m, two_block))
            return two_block_model(std::stoul(m[1]), std::stod(m[2]), std::stod(m[3]));
        if (std::regex_match(preset, m, random)) return random_model(std::stoul(m[1]), std::stoul(m[2]), std::stoull(m[3]));
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const ValidationError*>(&e)) throw;
        throw ValidationError("graph preset '" + preset + "': " + e.what());
    }
    throw ValidationError("unknown graph preset '" + preset + "'");
}

struct Theorem2Terms {
    double l_snmf = 0.0;
    double l_ncl = 0.0;
};

/// L_SNMF by the matrix residual ||Abar - F F^T||^2 with rows
/// F_x = sqrt(P(x)) f(x); L_NCL by explicit sums over the joint P(x, x+) and
/// the product of marginals.
inline Theorem2Terms theorem2_terms(const CooccurrenceGraph& g, const DenseMatrix& features) {
    const std::size_t n = g.A.rows();
    require(features.rows() == n, "theorem2: one feature row per node required");
    DenseMatrix F = features;
    for (std::size_t x = 0; x < n; ++x)
        for (double& v : F.row(x)) v *= std::sqrt(g.marginals[x]);
    Theorem2Terms t;
    t.l_snmf = frobenius_norm_sq(g.Abar - matmul_nt(F, F));
    double positive = 0.0, negative = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
            const double s = dot(features.row(x), features.row(y));
            positive += g.A(x, y) * s;
            negative += g.marginals[x] * g.marginals[y] * s * s;
        }
    }
    t.l_ncl = -2.0 * positive + negative;
    return t;
}

struct Theorem2Report {
    std::size_t nodes = 0;
    std::size_t feature_dim = 0;
    std::size_t trials = 0;
    double constant = 0.0;
    double max_deviation = 0.0;  // max |(L_SNMF - L_NCL) - constant|
    bool passed = false;
};

inline Theorem2Report verify_theorem2(const AugmentationModel& model, std::size_t feature_dim, std::size_t trials,
                                      std::uint64_t seed) {
    require(model.augmented_count() <= 16, "verify theorem2: graph must have at most 16 nodes");
    require(feature_dim >= 1, "verify theorem2: feature_dim must be positive");
    const CooccurrenceGraph g = build_cooccurrence(model);
    Theorem2Report rep;
    rep.nodes = g.A.rows();
    rep.feature_dim = feature_dim;
    rep.trials = trials;
    rep.constant = snmf_vs_ncl_constant(g);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (std::size_t t = 0; t < trials; ++t) {
        DenseMatrix f(rep.nodes, feature_dim);
        for (double& v : f.values()) v = dist(rng);
        const auto terms = theorem2_terms(g, f);
        rep.max_deviation = std::max(rep.max_deviation, std::abs(terms.l_snmf - terms.l_ncl - rep.constant));
    }
    rep.passed = rep.max_deviation < 1e-8;
    return rep;
}

inline nlohmann::json to_json(const Theorem2Report& r) {
    return {{"nodes", r.nodes},         {"feature_dim", r.feature_dim},     {"trials", r.trials},
            {"constant", r.constant},   {"max_deviation", r.max_deviation}, {"passed", r.passed}};
}

}  // namespace nngcd

#endif  // NNGCD_VERIFY_HPP
