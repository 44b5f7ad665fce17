#ifndef NNGCD_CLUSTERING_HPP
#define NNGCD_CLUSTERING_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "nngcd/errors.hpp"
#include "nngcd/matrix.hpp"

namespace nngcd {

struct ClusterAssignment {
    std::vector<int> labels;
    std::size_t K = 0;

    void validate() const {
        require(K >= 1, "assignment needs at least one cluster");
        for (int l : labels) {
            require(l >= 0 && static_cast<std::size_t>(l) < K, "cluster id " + std::to_string(l) + " outside [0, " +
                                                                   std::to_string(K) + ")");
        }
    }

    std::vector<std::size_t> cluster_sizes() const {
        std::vector<std::size_t> sizes(K, 0);
        for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
        return sizes;
    }
};

struct ClusteringResult {
    ClusterAssignment assignment;
    double loss = 0.0;
    DenseMatrix centroids;  // feature-space k-means only
};

/// n x K matrix whose column k is the indicator of cluster k scaled by 1/sqrt(n_k).
inline DenseMatrix indicator_matrix(const ClusterAssignment& a) {
    a.validate();
    const auto sizes = a.cluster_sizes();
    for (std::size_t k = 0; k < a.K; ++k) require(sizes[k] > 0, "indicator_matrix: cluster " + std::to_string(k) + " is empty");
    DenseMatrix H(a.labels.size(), a.K);
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        const auto k = static_cast<std::size_t>(a.labels[i]);
        H(i, k) = 1.0 / std::sqrt(static_cast<double>(sizes[k]));
    }
    return H;
}

/// sum_i A_ii - sum_k (1/n_k) sum_{i,j in C_k} A_ij
inline double kernel_kmeans_loss(const DenseMatrix& A, const ClusterAssignment& a) {
    require(A.rows() == A.cols(), "kernel_kmeans_loss: kernel must be square");
    require(max_abs_asymmetry(A) <= 1e-10, "kernel_kmeans_loss: kernel is not symmetric");
    require(a.labels.size() == A.rows(), "kernel_kmeans_loss: assignment length does not match kernel");
    a.validate();
    const auto sizes = a.cluster_sizes();
    std::vector<double> within(a.K, 0.0);
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j)
            if (a.labels[i] == a.labels[j]) within[static_cast<std::size_t>(a.labels[i])] += A(i, j);
    double loss = trace(A);
    for (std::size_t k = 0; k < a.K; ++k)
        if (sizes[k] > 0) loss -= within[k] / static_cast<double>(sizes[k]);
    return loss;
}

namespace detail {

// Index drawn with probability proportional to weights; uniform when all are zero.
inline std::size_t weighted_pick(const std::vector<double>& weights, std::mt19937_64& rng) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) {
        std::uniform_int_distribution<std::size_t> uni(0, weights.size() - 1);
        return uni(rng);
    }
    std::uniform_real_distribution<double> dist(0.0, total);
    const double target = dist(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (target < acc && weights[i] > 0.0) return i;
    }
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    return 0;
}

// k-means++ seeding from a squared-distance oracle.
template <class Dist>
std::vector<std::size_t> plusplus_seeds(std::size_t n, std::size_t K, std::mt19937_64& rng, Dist&& dist2) {
    std::vector<std::size_t> seeds;
    std::uniform_int_distribution<std::size_t> uni(0, n - 1);
    seeds.push_back(uni(rng));
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    while (seeds.size() < K) {
        for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], std::max(0.0, dist2(i, seeds.back())));
        std::vector<double> w = best;
        for (std::size_t s : seeds) w[s] = 0.0;
        seeds.push_back(weighted_pick(w, rng));
    }
    return seeds;
}

// Moves the point farthest from its own centroid into each empty cluster.
// dist(i, k) is the squared distance of point i to cluster k's centroid.
template <class Dist>
bool fill_empty_clusters(std::vector<int>& labels, std::size_t K, Dist&& dist) {
    bool changed = false;
    std::vector<std::size_t> sizes(K, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (std::size_t k = 0; k < K; ++k) {
        if (sizes[k] > 0) continue;
        double worst = -1.0;
        std::size_t pick = labels.size();
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const auto own = static_cast<std::size_t>(labels[i]);
            if (sizes[own] <= 1) continue;
            const double d = dist(i, own);
            if (d > worst) {
                worst = d;
                pick = i;
            }
        }
        if (pick == labels.size()) break;
        --sizes[static_cast<std::size_t>(labels[pick])];
        labels[pick] = static_cast<int>(k);
        ++sizes[k];
        changed = true;
    }
    return changed;
}

inline std::uint64_t restart_seed(std::uint64_t seed, std::size_t restart) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(restart)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace detail

/// Lloyd iterations on a kernel (Gram) matrix. Best of `restarts` runs by loss,
/// ties resolved toward the earliest restart.
inline ClusteringResult kernel_kmeans(const DenseMatrix& A, std::size_t K, std::size_t restarts = 10,
                                      std::uint64_t seed = 0, std::size_t max_iters = 300) {
    require(A.rows() == A.cols(), "kernel_kmeans: kernel must be square");
    require(max_abs_asymmetry(A) <= 1e-10, "kernel_kmeans: kernel is not symmetric");
    const std::size_t n = A.rows();
    require(K >= 1 && K <= n, "kernel_kmeans: K=" + std::to_string(K) + " must lie in [1, " + std::to_string(n) + "]");
    require(restarts >= 1, "kernel_kmeans: need at least one restart");

    ClusteringResult best;
    best.loss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
        std::mt19937_64 rng(detail::restart_seed(seed, r));
        const auto seeds = detail::plusplus_seeds(
            n, K, rng, [&](std::size_t i, std::size_t c) { return A(i, i) + A(c, c) - 2.0 * A(i, c); });

        std::vector<int> labels(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < K; ++k) {
                const double d = A(i, i) + A(seeds[k], seeds[k]) - 2.0 * A(i, seeds[k]);
                if (d < bd) {
                    bd = d;
                    labels[i] = static_cast<int>(k);
                }
            }
        }
        for (std::size_t k = 0; k < K; ++k) labels[seeds[k]] = static_cast<int>(k);

        DenseMatrix dist(n, K);
        auto compute_dist = [&]() {
            std::vector<double> size(K, 0.0), self(K, 0.0);
            DenseMatrix cross(n, K);
            for (std::size_t i = 0; i < n; ++i) size[static_cast<std::size_t>(labels[i])] += 1.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) cross(i, static_cast<std::size_t>(labels[j])) += A(i, j);
            for (std::size_t i = 0; i < n; ++i) self[static_cast<std::size_t>(labels[i])] += cross(i, static_cast<std::size_t>(labels[i]));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < K; ++k)
                    dist(i, k) = size[k] > 0 ? A(i, i) - 2.0 * cross(i, k) / size[k] + self[k] / (size[k] * size[k])
                                             : std::numeric_limits<double>::infinity();
        };

        for (std::size_t it = 0; it < max_iters; ++it) {
            compute_dist();
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                auto own = static_cast<std::size_t>(labels[i]);
                std::size_t pick = own;
                for (std::size_t k = 0; k < K; ++k)
                    if (dist(i, k) < dist(i, pick) - 1e-12) pick = k;
                if (pick != own) {
                    labels[i] = static_cast<int>(pick);
                    changed = true;
                }
            }
            if (detail::fill_empty_clusters(labels, K, [&](std::size_t i, std::size_t k) { return dist(i, k); }))
                changed = true;
            if (!changed) break;
        }

        ClusterAssignment a{labels, K};
        const double loss = kernel_kmeans_loss(A, a);
        if (loss < best.loss) {
            best.loss = loss;
            best.assignment = std::move(a);
        }
    }
    return best;
}

/// Lloyd's algorithm on feature rows with k-means++ seeding.
inline ClusteringResult kmeans(const DenseMatrix& X, std::size_t K, std::size_t restarts = 10, std::uint64_t seed = 0,
                               std::size_t max_iters = 300) {
    const std::size_t n = X.rows();
    const std::size_t d = X.cols();
    require(K >= 1 && K <= n, "kmeans: K=" + std::to_string(K) + " must lie in [1, " + std::to_string(n) + "]");
    require(restarts >= 1, "kmeans: need at least one restart");

    auto sqdist = [&](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
        return s;
    };

    ClusteringResult best;
    best.loss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
        std::mt19937_64 rng(detail::restart_seed(seed, r));
        const auto seeds =
            detail::plusplus_seeds(n, K, rng, [&](std::size_t i, std::size_t c) { return sqdist(X.row(i), X.row(c)); });
        DenseMatrix centroids = gather_rows(X, seeds);
        std::vector<int> labels(n, -1);

        auto update_centroids = [&]() {
            std::vector<double> counts(K, 0.0);
            DenseMatrix sums(K, d);
            for (std::size_t i = 0; i < n; ++i) {
                const auto k = static_cast<std::size_t>(labels[i]);
                counts[k] += 1.0;
                auto row = X.row(i);
                auto out = sums.row(k);
                for (std::size_t j = 0; j < d; ++j) out[j] += row[j];
            }
            for (std::size_t k = 0; k < K; ++k)
                if (counts[k] > 0)
                    for (std::size_t j = 0; j < d; ++j) centroids(k, j) = sums(k, j) / counts[k];
        };

        for (std::size_t it = 0; it < max_iters; ++it) {
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t pick = labels[i] < 0 ? 0 : static_cast<std::size_t>(labels[i]);
                double bd = sqdist(X.row(i), centroids.row(pick));
                for (std::size_t k = 0; k < K; ++k) {
                    const double dk = sqdist(X.row(i), centroids.row(k));
                    if (dk < bd - 1e-12) {
                        bd = dk;
                        pick = k;
                    }
                }
                if (labels[i] != static_cast<int>(pick)) {
                    labels[i] = static_cast<int>(pick);
                    changed = true;
                }
            }
            if (detail::fill_empty_clusters(labels, K, [&](std::size_t i, std::size_t k) {
                    return sqdist(X.row(i), centroids.row(k));
                }))
                changed = true;
            update_centroids();
            if (!changed) break;
        }

        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) loss += sqdist(X.row(i), centroids.row(static_cast<std::size_t>(labels[i])));
        if (loss < best.loss) {
            best.loss = loss;
            best.assignment = ClusterAssignment{labels, K};
            best.centroids = centroids;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Evaluation

/// mapping[cluster id] = matched class id, or -1 when the cluster is left
/// unmatched (more clusters than classes).
struct MatchResult {
    std::vector<int> mapping;
    std::size_t matches = 0;
};

namespace detail {

// Minimum-cost perfect assignment on a square matrix (potentials method).
// Returns row_to_col.
inline std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<long long>>& cost) {
    const std::size_t n = cost.size();
    constexpr long long inf = std::numeric_limits<long long>::max() / 4;
    std::vector<long long> u(n + 1, 0), v(n + 1, 0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<long long> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            long long delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const long long cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_to_col(n, 0);
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

}  // namespace detail

/// Cluster -> class mapping maximizing the number of agreeing samples.
inline MatchResult hungarian_match(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    require(y_true.size() == y_pred.size(), "hungarian_match: label vectors differ in length");
    MatchResult result;
    if (y_true.empty()) return result;
    for (std::size_t i = 0; i < y_true.size(); ++i)
        require(y_true[i] >= 0 && y_pred[i] >= 0, "hungarian_match: labels must be non-negative");
    const auto n_pred = static_cast<std::size_t>(*std::max_element(y_pred.begin(), y_pred.end())) + 1;
    const auto n_true = static_cast<std::size_t>(*std::max_element(y_true.begin(), y_true.end())) + 1;
    const std::size_t dim = std::max(n_pred, n_true);

    std::vector<std::vector<long long>> counts(dim, std::vector<long long>(dim, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i)
        ++counts[static_cast<std::size_t>(y_pred[i])][static_cast<std::size_t>(y_true[i])];
    long long top = 0;
    for (const auto& row : counts)
        for (long long c : row) top = std::max(top, c);
    auto cost = counts;
    for (auto& row : cost)
        for (long long& c : row) c = top - c;

    const auto row_to_col = detail::min_cost_assignment(cost);
    result.mapping.assign(n_pred, -1);
    for (std::size_t k = 0; k < n_pred; ++k) {
        const std::size_t cls = row_to_col[k];
        if (cls < n_true) {
            result.mapping[k] = static_cast<int>(cls);
            result.matches += static_cast<std::size_t>(counts[k][cls]);
        }
    }
    return result;
}

struct AccReport {
    double acc_all = 0.0;
    std::optional<double> acc_old;
    std::optional<double> acc_new;
    std::vector<int> permutation;  // cluster id -> class id, -1 if unmatched
};

/// Clustering accuracy. The permutation is fit once on all samples and then
/// applied to the base (old_mask true) and novel subsets.
inline AccReport acc(const std::vector<int>& y_true, const std::vector<int>& y_pred, const std::vector<bool>& old_mask) {
    require(y_true.size() == y_pred.size(), "acc: label vectors differ in length");
    require(old_mask.size() == y_true.size(), "acc: mask length does not match labels");
    require(!y_true.empty(), "acc: no samples");
    const MatchResult match = hungarian_match(y_true, y_pred);
    AccReport report;
    report.permutation = match.mapping;
    report.acc_all = static_cast<double>(match.matches) / static_cast<double>(y_true.size());

    std::size_t old_total = 0, old_hit = 0, new_total = 0, new_hit = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool hit = match.mapping[static_cast<std::size_t>(y_pred[i])] == y_true[i];
        if (old_mask[i]) {
            ++old_total;
            old_hit += hit;
        } else {
            ++new_total;
            new_hit += hit;
        }
    }
    if (old_total > 0) report.acc_old = static_cast<double>(old_hit) / static_cast<double>(old_total);
    if (new_total > 0) report.acc_new = static_cast<double>(new_hit) / static_cast<double>(new_total);
    return report;
}

}  // namespace nngcd

#endif  // NNGCD_CLUSTERING_HPP
