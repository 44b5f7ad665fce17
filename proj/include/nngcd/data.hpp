#ifndef NNGCD_DATA_HPP
#define NNGCD_DATA_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "nngcd/errors.hpp"
#include "nngcd/io.hpp"
#include "nngcd/matrix.hpp"

namespace nngcd {

/// Samples with ground truth. Classes [0, K_old) are base classes; labeled
/// samples only come from base classes.
struct GcdDataset {
    DenseMatrix X;
    std::vector<int> y;
    std::vector<bool> old_mask;      // per sample: belongs to a base class
    std::vector<bool> labeled_mask;  // per sample
    std::size_t K_old = 0;
    std::size_t K_new = 0;

    std::size_t size() const { return X.rows(); }
    std::size_t num_classes() const { return K_old + K_new; }

    void validate() const {
        const std::size_t n = X.rows();
        require(n > 0, "dataset: no samples");
        require(y.size() == n && old_mask.size() == n && labeled_mask.size() == n,
                "dataset: labels and masks must have one entry per sample");
        require(K_old + K_new >= 1, "dataset: no classes");
        std::vector<std::size_t> counts(num_classes(), 0);
        std::vector<int> class_old(num_classes(), -1);
        for (std::size_t i = 0; i < n; ++i) {
            require(y[i] >= 0 && static_cast<std::size_t>(y[i]) < num_classes(),
                    "dataset: class id " + std::to_string(y[i]) + " out of range");
            ++counts[static_cast<std::size_t>(y[i])];
            const int flag = old_mask[i] ? 1 : 0;
            auto& seen = class_old[static_cast<std::size_t>(y[i])];
            require(seen < 0 || seen == flag, "dataset: class " + std::to_string(y[i]) + " is both base and novel");
            seen = flag;
            require(!labeled_mask[i] || old_mask[i], "dataset: sample " + std::to_string(i) + " is labeled but novel");
        }
        for (std::size_t k = 0; k < counts.size(); ++k)
            require(counts[k] > 0, "dataset: class " + std::to_string(k) + " is empty");
    }

    std::vector<std::size_t> unlabeled_indices() const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < size(); ++i)
            if (!labeled_mask[i]) idx.push_back(i);
        return idx;
    }
};

struct SynthOptions {
    std::size_t K_old = 2;
    std::size_t K_new = 2;
    std::size_t per_class = 50;
    std::size_t dim = 16;
    double separation = 10.0;
    double label_fraction = 0.5;
    double shared_offset = 0.0;  // norm of a mean vector common to every class
    std::uint64_t seed = 0;
};

namespace detail {

// Rows are K points with all pairwise distances >= separation.
inline DenseMatrix blob_centers(std::size_t K, std::size_t dim, double separation, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    DenseMatrix centers(K, dim);
    if (dim >= K) {
        // scaled simplex corners sqrt(s^2/2) e_k, then a random rotation
        DenseMatrix Q(dim, dim);
        for (double& v : Q.values()) v = normal(rng);
        for (std::size_t i = 0; i < dim; ++i) {  // Gram-Schmidt on rows
            for (std::size_t j = 0; j < i; ++j) {
                const double proj = dot(Q.row(i), Q.row(j));
                for (std::size_t k = 0; k < dim; ++k) Q(i, k) -= proj * Q(j, k);
            }
            const double nrm = norm2(Q.row(i));
            for (double& v : Q.row(i)) v /= nrm;
        }
        const double radius = separation / std::sqrt(2.0);
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j < dim; ++j) centers(k, j) = radius * Q(k, j);
        return centers;
    }
    double scale = separation * static_cast<double>(K);
    for (std::size_t k = 0; k < K;) {
        for (std::size_t j = 0; j < dim; ++j) centers(k, j) = scale * normal(rng);
        bool ok = true;
        for (std::size_t m = 0; m < k && ok; ++m) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) d2 += (centers(k, j) - centers(m, j)) * (centers(k, j) - centers(m, j));
            ok = std::sqrt(d2) >= separation;
        }
        if (ok) ++k;
    }
    return centers;
}

}  // namespace detail

/// Isotropic unit-variance Gaussian blobs, optionally shifted by a common
/// offset so that classes share a dominant direction. Exactly
/// floor(label_fraction * per_class) samples of every base class are labeled.
inline GcdDataset synth_gcd(const SynthOptions& o) {
    require(o.K_old >= 1, "synth: K_old must be at least 1");
    require(o.per_class >= 1 && o.dim >= 1, "synth: per_class and dim must be at least 1");
    require(o.separation > 0.0, "synth: separation must be positive");
    require(o.label_fraction >= 0.0 && o.label_fraction <= 1.0, "synth: label_fraction must lie in [0, 1]");

    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t K = o.K_old + o.K_new;
    require(o.shared_offset >= 0.0, "synth: shared_offset must be non-negative");
    DenseMatrix centers = detail::blob_centers(K + 1, o.dim, o.separation, rng);
    // the extra center supplies the shared direction, so the offset does not
    // change pairwise class distances
    Vector shared(centers.row(K).begin(), centers.row(K).end());
    const double shared_norm = norm2(shared);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < o.dim; ++j) centers(k, j) += o.shared_offset * shared[j] / shared_norm;
    const auto labeled_per_class = static_cast<std::size_t>(std::floor(o.label_fraction * static_cast<double>(o.per_class)));

    GcdDataset d;
    d.K_old = o.K_old;
    d.K_new = o.K_new;
    d.X = DenseMatrix(K * o.per_class, o.dim);
    std::size_t row = 0;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t s = 0; s < o.per_class; ++s, ++row) {
            for (std::size_t j = 0; j < o.dim; ++j) d.X(row, j) = centers(k, j) + normal(rng);
            d.y.push_back(static_cast<int>(k));
            d.old_mask.push_back(k < o.K_old);
            d.labeled_mask.push_back(k < o.K_old && s < labeled_per_class);
        }
    }
    d.validate();
    return d;
}

/// Reads features, labels and a two-column mask file (old, labeled). K_old
/// and K_new are recovered from the classes present.
inline GcdDataset load_dataset(const std::string& features_path, const std::string& labels_path,
                               const std::string& masks_path) {
    GcdDataset d;
    d.X = io::load_features(features_path);
    d.y = io::load_labels(labels_path);
    d.old_mask = io::load_mask(masks_path, 0);
    d.labeled_mask = io::load_mask(masks_path, 1);
    require(d.y.size() == d.X.rows(), labels_path + ": expected " + std::to_string(d.X.rows()) + " labels");
    require(d.old_mask.size() == d.X.rows(), masks_path + ": expected " + std::to_string(d.X.rows()) + " rows");
    std::set<int> old_classes, new_classes;
    for (std::size_t i = 0; i < d.y.size(); ++i) (d.old_mask[i] ? old_classes : new_classes).insert(d.y[i]);
    d.K_old = old_classes.size();
    d.K_new = new_classes.size();
    d.validate();
    return d;
}

inline void save_dataset(const GcdDataset& d, const std::string& features_path, const std::string& labels_path,
                         const std::string& masks_path) {
    io::save_matrix(features_path, d.X);
    io::save_labels(labels_path, d.y, "class");
    DenseMatrix masks(d.size(), 2);
    for (std::size_t i = 0; i < d.size(); ++i) {
        masks(i, 0) = d.old_mask[i] ? 1.0 : 0.0;
        masks(i, 1) = d.labeled_mask[i] ? 1.0 : 0.0;
    }
    io::save_matrix(masks_path, masks, "old,labeled");
}

}  // namespace nngcd

#endif  // NNGCD_DATA_HPP
