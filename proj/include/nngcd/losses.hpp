#ifndef NNGCD_LOSSES_HPP
#define NNGCD_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nngcd/activations.hpp"
#include "nngcd/cooccurrence.hpp"
#include "nngcd/errors.hpp"
#include "nngcd/matrix.hpp"

namespace nngcd {

/// Every scalar hyperparameter of the objective. Defaults are the published
/// settings.
struct LossConfig {
    double lambda_balance = 0.35;
    double tau = 0.5;
    double tau_s = 0.1;
    double tau_t = 0.007;
    double mu = 0.1;
    double sigma = 1.0;
    double epsilon_entropy = 1.0;
    double beta = 0.6;
    double gamma = 3e-5;
    bool hsr_on_prototypes = false;

    void validate() const {
        require(lambda_balance >= 0.0 && lambda_balance <= 1.0, "lambda_balance must lie in [0, 1]");
        require(tau > 0.0, "tau must be positive");
        require(tau_s > 0.0, "tau_s must be positive");
        require(tau_t > 0.0, "tau_t must be positive");
        require(sigma > 0.0, "sigma must be positive");
        require(epsilon_entropy >= 0.0, "epsilon_entropy must be non-negative");
        require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
        require(gamma >= 0.0, "gamma must be non-negative");
    }
};

/// Anchors scored against a pool of candidate rows. positive[i] and
/// negatives[i] index into candidates. labels (optional) are per anchor, with
/// -1 meaning unlabeled.
struct ContrastiveBatch {
    DenseMatrix anchors;
    DenseMatrix candidates;
    std::vector<std::size_t> positive;
    std::vector<std::vector<std::size_t>> negatives;
    std::vector<int> labels;

    std::size_t size() const { return anchors.rows(); }

    void validate() const {
        require(anchors.cols() == candidates.cols(), "contrastive batch: anchor and candidate dimensions differ");
        require(positive.size() == anchors.rows() && negatives.size() == anchors.rows(),
                "contrastive batch: one positive and one negative set per anchor required");
        for (std::size_t i = 0; i < anchors.rows(); ++i) {
            require(positive[i] < candidates.rows(), "contrastive batch: positive index out of range");
            for (std::size_t j : negatives[i]) require(j < candidates.rows(), "contrastive batch: negative index out of range");
        }
        require(labels.empty() || labels.size() == anchors.rows(), "contrastive batch: one label per anchor required");
    }

    /// Two views of the same B samples: anchor i pairs with view2 row i and
    /// treats every other view2 row as a negative.
    static ContrastiveBatch cross_view(DenseMatrix view1, DenseMatrix view2, std::vector<int> labels = {}) {
        require(view1.rows() == view2.rows(), "cross_view: views differ in sample count");
        ContrastiveBatch b;
        const std::size_t n = view1.rows();
        b.anchors = std::move(view1);
        b.candidates = std::move(view2);
        b.labels = std::move(labels);
        b.positive.resize(n);
        b.negatives.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            b.positive[i] = i;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) b.negatives[i].push_back(j);
        }
        b.validate();
        return b;
    }

    /// Explicit triples: anchor i, positive row i, and negatives[i] rows.
    static ContrastiveBatch from_pairs(const DenseMatrix& anchors, const DenseMatrix& positives,
                                       const std::vector<DenseMatrix>& negatives) {
        require(anchors.same_shape(positives), "from_pairs: anchors and positives differ in shape");
        require(negatives.size() == anchors.rows(), "from_pairs: one negative set per anchor required");
        std::size_t total = positives.rows();
        for (const auto& m : negatives) {
            require(m.rows() == 0 || m.cols() == anchors.cols(), "from_pairs: negative dimension mismatch");
            total += m.rows();
        }
        ContrastiveBatch b;
        b.anchors = anchors;
        b.candidates = DenseMatrix(total, anchors.cols());
        b.positive.resize(anchors.rows());
        b.negatives.resize(anchors.rows());
        std::size_t next = 0;
        for (std::size_t i = 0; i < positives.rows(); ++i, ++next) {
            std::copy_n(positives.row(i).begin(), anchors.cols(), b.candidates.row(next).begin());
            b.positive[i] = next;
        }
        for (std::size_t i = 0; i < negatives.size(); ++i) {
            for (std::size_t r = 0; r < negatives[i].rows(); ++r, ++next) {
                std::copy_n(negatives[i].row(r).begin(), anchors.cols(), b.candidates.row(next).begin());
                b.negatives[i].push_back(next);
            }
        }
        return b;
    }
};

/// Loss value with gradients with respect to anchor and candidate rows.
struct BatchGrad {
    double value = 0.0;
    DenseMatrix d_anchors;
    DenseMatrix d_candidates;
};

namespace detail {

inline BatchGrad zero_grad(const ContrastiveBatch& b) {
    return {0.0, DenseMatrix(b.anchors.rows(), b.anchors.cols()), DenseMatrix(b.candidates.rows(), b.candidates.cols())};
}

// Accumulates coefficient * d(a_i . c_j) into the gradient.
inline void add_pair_grad(BatchGrad& g, const ContrastiveBatch& b, std::size_t i, std::size_t j, double coefficient) {
    if (coefficient == 0.0) return;
    auto da = g.d_anchors.row(i);
    auto dc = g.d_candidates.row(j);
    auto a = b.anchors.row(i);
    auto c = b.candidates.row(j);
    for (std::size_t k = 0; k < a.size(); ++k) {
        da[k] += coefficient * c[k];
        dc[k] += coefficient * a[k];
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// InfoNCE family

/// mean_i -log( e^{s+/tau} / (e^{s+/tau} + sum_j e^{s-_j/tau}) ), s = inner products.
inline BatchGrad info_nce_grad(const ContrastiveBatch& b, double tau) {
    require(tau > 0.0, "info_nce: tau must be positive");
    b.validate();
    BatchGrad g = detail::zero_grad(b);
    const std::size_t n = b.size();
    if (n == 0) return g;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> idx{b.positive[i]};
        idx.insert(idx.end(), b.negatives[i].begin(), b.negatives[i].end());
        Vector logits(idx.size());
        for (std::size_t t = 0; t < idx.size(); ++t) logits[t] = dot(b.anchors.row(i), b.candidates.row(idx[t])) / tau;
        const double lse = logsumexp(logits);
        g.value += (lse - logits[0]) * inv_n;
        for (std::size_t t = 0; t < idx.size(); ++t) {
            const double w = std::exp(logits[t] - lse) - (t == 0 ? 1.0 : 0.0);
            detail::add_pair_grad(g, b, i, idx[t], w * inv_n / tau);
        }
    }
    return g;
}

inline double info_nce(const ContrastiveBatch& b, double tau) { return info_nce_grad(b, tau).value; }

/// SimCLR as written: mean_i -log( e^{s_ii'/tau} / sum_{n != i} e^{s_in'/tau} ).
/// The positive does not appear in the denominator.
inline BatchGrad simclr_loss_grad(const ContrastiveBatch& b, double tau) {
    require(tau > 0.0, "simclr_loss: tau must be positive");
    require(b.size() >= 2, "simclr_loss: batch needs at least two samples");
    b.validate();
    BatchGrad g = detail::zero_grad(b);
    const double inv_n = 1.0 / static_cast<double>(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto& neg = b.negatives[i];
        require(!neg.empty(), "simclr_loss: anchor " + std::to_string(i) + " has no negatives");
        Vector logits(neg.size());
        for (std::size_t t = 0; t < neg.size(); ++t) logits[t] = dot(b.anchors.row(i), b.candidates.row(neg[t])) / tau;
        const double lse = logsumexp(logits);
        const double pos = dot(b.anchors.row(i), b.candidates.row(b.positive[i])) / tau;
        g.value += (lse - pos) * inv_n;
        detail::add_pair_grad(g, b, i, b.positive[i], -inv_n / tau);
        for (std::size_t t = 0; t < neg.size(); ++t)
            detail::add_pair_grad(g, b, i, neg[t], std::exp(logits[t] - lse) * inv_n / tau);
    }
    return g;
}

inline double simclr_loss(const ContrastiveBatch& b, double tau) { return simclr_loss_grad(b, tau).value; }

struct SupConGrad : BatchGrad {
    std::size_t excluded_anchors = 0;
};

/// Supervised contrastive loss over the labeled anchors of a cross-view batch
/// (candidate row i is the second view of anchor i). N_i holds every labeled
/// index sharing anchor i's label, i included; the denominator runs over the
/// labeled indices n != i. Anchors with an empty N_i or empty denominator are
/// skipped and counted.
inline SupConGrad supcon_loss_grad(const ContrastiveBatch& b, double tau) {
    require(tau > 0.0, "supcon_loss: tau must be positive");
    require(b.labels.size() == b.size(), "supcon_loss: batch carries no labels");
    require(b.candidates.rows() == b.anchors.rows(), "supcon_loss: needs a cross-view batch");
    b.validate();
    SupConGrad g;
    g.d_anchors = DenseMatrix(b.anchors.rows(), b.anchors.cols());
    g.d_candidates = DenseMatrix(b.candidates.rows(), b.candidates.cols());

    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b.labels[i] >= 0) labeled.push_back(i);
    require(!labeled.empty(), "supcon_loss: labeled subset is empty");
    const double inv_bl = 1.0 / static_cast<double>(labeled.size());

    for (std::size_t i : labeled) {
        std::vector<std::size_t> same, denom;
        for (std::size_t q : labeled) {
            if (b.labels[q] == b.labels[i]) same.push_back(q);
            if (q != i) denom.push_back(q);
        }
        if (same.empty() || denom.empty()) {
            ++g.excluded_anchors;
            continue;
        }
        Vector logits(denom.size());
        for (std::size_t t = 0; t < denom.size(); ++t) logits[t] = dot(b.anchors.row(i), b.candidates.row(denom[t])) / tau;
        const double lse = logsumexp(logits);
        const double inv_ni = 1.0 / static_cast<double>(same.size());
        for (std::size_t q : same) {
            const double s = dot(b.anchors.row(i), b.candidates.row(q)) / tau;
            g.value += (lse - s) * inv_ni * inv_bl;
            detail::add_pair_grad(g, b, i, q, -inv_ni * inv_bl / tau);
        }
        // each of the |N_i| terms carries the same log-denominator
        for (std::size_t t = 0; t < denom.size(); ++t)
            detail::add_pair_grad(g, b, i, denom[t], std::exp(logits[t] - lse) * inv_bl / tau);
    }
    return g;
}

inline double supcon_loss(const ContrastiveBatch& b, double tau) { return supcon_loss_grad(b, tau).value; }

/// Gaussian-reweighted NCE. Per anchor:
///   -s+/tau + log( sum_j w_j e^{s_j/tau} / sum_j w_j ),  w_j = N(s_j; mu, sigma)
/// with s the anchor-candidate inner products over that anchor's negatives.
inline BatchGrad nmf_nce_grad(const ContrastiveBatch& b, double tau, double mu, double sigma) {
    require(tau > 0.0, "nmf_nce: tau must be positive");
    require(sigma > 0.0, "nmf_nce: sigma must be positive");
    b.validate();
    BatchGrad g = detail::zero_grad(b);
    if (b.size() == 0) return g;
    const double inv_n = 1.0 / static_cast<double>(b.size());
    const double inv_var = 1.0 / (sigma * sigma);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto& neg = b.negatives[i];
        require(!neg.empty(), "nmf_nce: anchor " + std::to_string(i) + " has no negatives");
        Vector log_w(neg.size()), weighted(neg.size()), slope(neg.size());
        for (std::size_t t = 0; t < neg.size(); ++t) {
            const double s = dot(b.anchors.row(i), b.candidates.row(neg[t]));
            log_w[t] = -0.5 * (s - mu) * (s - mu) * inv_var;
            weighted[t] = log_w[t] + s / tau;
            slope[t] = -(s - mu) * inv_var;
        }
        const double lse_weighted = logsumexp(weighted);
        const double lse_w = logsumexp(log_w);
        const double pos = dot(b.anchors.row(i), b.candidates.row(b.positive[i]));
        g.value += (-pos / tau + lse_weighted - lse_w) * inv_n;
        detail::add_pair_grad(g, b, i, b.positive[i], -inv_n / tau);
        for (std::size_t t = 0; t < neg.size(); ++t) {
            const double a = std::exp(weighted[t] - lse_weighted);
            const double v = std::exp(log_w[t] - lse_w);
            detail::add_pair_grad(g, b, i, neg[t], (a * (1.0 / tau + slope[t]) - v * slope[t]) * inv_n);
        }
    }
    return g;
}

inline double nmf_nce(const ContrastiveBatch& b, double tau, double mu, double sigma) {
    return nmf_nce_grad(b, tau, mu, sigma).value;
}

// ---------------------------------------------------------------------------
// Spectral family

/// -2 E[a . c+] + E[(a . c-)^2]; the second expectation runs over every
/// (anchor, negative) pair.
inline BatchGrad spectral_loss_grad(const ContrastiveBatch& b) {
    b.validate();
    BatchGrad g = detail::zero_grad(b);
    const std::size_t n = b.size();
    if (n == 0) return g;
    std::size_t pairs = 0;
    for (const auto& neg : b.negatives) pairs += neg.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = dot(b.anchors.row(i), b.candidates.row(b.positive[i]));
        g.value += -2.0 * s * inv_n;
        detail::add_pair_grad(g, b, i, b.positive[i], -2.0 * inv_n);
    }
    if (pairs > 0) {
        const double inv_p = 1.0 / static_cast<double>(pairs);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j : b.negatives[i]) {
                const double s = dot(b.anchors.row(i), b.candidates.row(j));
                g.value += s * s * inv_p;
                detail::add_pair_grad(g, b, i, j, 2.0 * s * inv_p);
            }
        }
    }
    return g;
}

inline double spectral_loss(const ContrastiveBatch& b) { return spectral_loss_grad(b).value; }

/// Spectral loss on phi-activated features; gradients are with respect to the
/// raw (pre-activation) rows.
inline BatchGrad ncl_loss_grad(const ContrastiveBatch& b, Activation phi) {
    ContrastiveBatch activated = b;
    activated.anchors = activate(phi, b.anchors);
    activated.candidates = activate(phi, b.candidates);
    BatchGrad g = spectral_loss_grad(activated);
    g.d_anchors = activate_backward(phi, b.anchors, g.d_anchors);
    g.d_candidates = activate_backward(phi, b.candidates, g.d_candidates);
    return g;
}

inline double ncl_loss(const ContrastiveBatch& b, Activation phi) { return ncl_loss_grad(b, phi).value; }

/// sum_{x,x'} P(x,x')^2 / (P(x) P(x')): the feature-independent gap between
/// the SNMF residual on Abar and the NCL loss.
inline double snmf_vs_ncl_constant(const CooccurrenceGraph& g) {
    const std::size_t n = g.A.rows();
    require(g.marginals.size() == n, "snmf_vs_ncl_constant: marginals do not match graph");
    for (std::size_t x = 0; x < n; ++x)
        require(g.marginals[x] > 0.0, "snmf_vs_ncl_constant: node " + std::to_string(x) + " has zero marginal");
    double c = 0.0;
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y) c += g.A(x, y) * g.A(x, y) / (g.marginals[x] * g.marginals[y]);
    return c;
}

// ---------------------------------------------------------------------------
// Prototype soft labels and pseudo-label cross-entropy

namespace detail {

inline void require_distribution_rows(const DenseMatrix& m, const char* what) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (double v : m.row(i)) {
            require(v >= 0.0, std::string(what) + ": row " + std::to_string(i) + " has a negative entry");
            s += v;
        }
        require(std::abs(s - 1.0) <= 1e-9, std::string(what) + ": row " + std::to_string(i) + " does not sum to 1");
    }
}

}  // namespace detail

/// Rows scaled to unit Euclidean norm.
inline DenseMatrix l2_normalize_rows(const DenseMatrix& m) {
    DenseMatrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double nrm = norm2(m.row(i));
        require(nrm > 0.0, "l2_normalize_rows: row " + std::to_string(i) + " has zero norm");
        for (double& v : out.row(i)) v /= nrm;
    }
    return out;
}

/// Gradient through row normalization: (g - u (u . g)) / ||x|| per row.
inline DenseMatrix l2_normalize_rows_backward(const DenseMatrix& raw, const DenseMatrix& upstream) {
    require(raw.same_shape(upstream), "l2_normalize_rows_backward: shape mismatch");
    DenseMatrix out(raw.rows(), raw.cols());
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        const double nrm = norm2(raw.row(i));
        auto x = raw.row(i);
        auto gi = upstream.row(i);
        double proj = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) proj += x[k] * gi[k];
        proj /= nrm;
        for (std::size_t k = 0; k < x.size(); ++k) out(i, k) = (gi[k] - x[k] / nrm * proj) / nrm;
    }
    return out;
}

/// Rows divided by max(||x||, eps), so all-zero rows (a fully dead ReLU head)
/// map to zero instead of failing.
inline DenseMatrix l2_normalize_rows_stable(const DenseMatrix& m, double eps = 1e-12) {
    DenseMatrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double nrm = std::max(norm2(m.row(i)), eps);
        for (double& v : out.row(i)) v /= nrm;
    }
    return out;
}

inline DenseMatrix l2_normalize_rows_stable_backward(const DenseMatrix& raw, const DenseMatrix& upstream,
                                                     double eps = 1e-12) {
    require(raw.same_shape(upstream), "l2_normalize_rows_backward: shape mismatch");
    DenseMatrix out = upstream;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        const double nrm = norm2(raw.row(i));
        if (nrm <= eps) {
            for (double& v : out.row(i)) v /= eps;
            continue;
        }
        auto x = raw.row(i);
        auto gi = upstream.row(i);
        double proj = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) proj += x[k] * gi[k];
        proj /= nrm;
        for (std::size_t k = 0; k < x.size(); ++k) out(i, k) = (gi[k] - x[k] / nrm * proj) / nrm;
    }
    return out;
}

/// softmax_k( cos(z, c_k) / tau_s )
inline Vector soft_labels(std::span<const double> z, const DenseMatrix& prototypes, double tau_s) {
    require(tau_s > 0.0, "soft_labels: tau_s must be positive");
    require(z.size() == prototypes.cols(), "soft_labels: feature and prototype dimensions differ");
    const double zn = norm2(z);
    require(zn > 0.0, "soft_labels: zero-norm feature");
    Vector cosines(prototypes.rows());
    for (std::size_t k = 0; k < prototypes.rows(); ++k) {
        const double cn = norm2(prototypes.row(k));
        require(cn > 0.0, "soft_labels: prototype " + std::to_string(k) + " has zero norm");
        cosines[k] = dot(z, prototypes.row(k)) / (zn * cn);
    }
    return softmax(cosines, tau_s);
}

/// Row-wise soft labels for a batch of hidden features.
inline DenseMatrix soft_labels(const DenseMatrix& Z, const DenseMatrix& prototypes, double tau_s) {
    DenseMatrix P(Z.rows(), prototypes.rows());
    for (std::size_t i = 0; i < Z.rows(); ++i) {
        const Vector p = soft_labels(Z.row(i), prototypes, tau_s);
        std::copy(p.begin(), p.end(), P.row(i).begin());
    }
    return P;
}

/// -sum_k p_k log p_k with 0 log 0 = 0.
inline double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

namespace detail {

inline double cross_entropy_rows(const DenseMatrix& P, const DenseMatrix& Q) {
    double ce = 0.0;
    for (std::size_t i = 0; i < P.rows(); ++i) {
        for (std::size_t k = 0; k < P.cols(); ++k) {
            const double q = Q(i, k);
            if (q == 0.0) continue;
            if (P(i, k) <= 0.0) throw NumericError("cross-entropy: target mass on a zero-probability class");
            ce -= q * std::log(P(i, k));
        }
    }
    return ce / static_cast<double>(P.rows());
}

inline Vector mean_row(const DenseMatrix& P) {
    Vector mean(P.cols(), 0.0);
    for (std::size_t i = 0; i < P.rows(); ++i)
        for (std::size_t k = 0; k < P.cols(); ++k) mean[k] += P(i, k);
    for (double& v : mean) v /= static_cast<double>(P.rows());
    return mean;
}

}  // namespace detail

/// mean_i CE(q_i, p_i) - epsilon H(mean_i p_i). Rows of P hold predictions
/// (both views stacked), rows of Q the matching targets.
inline double pseudo_ce(const DenseMatrix& P, const DenseMatrix& Q, double epsilon) {
    require(P.same_shape(Q), "pseudo_ce: predictions and targets differ in shape");
    require(P.rows() > 0, "pseudo_ce: empty batch");
    require(epsilon >= 0.0, "pseudo_ce: epsilon must be non-negative");
    detail::require_distribution_rows(P, "pseudo_ce predictions");
    detail::require_distribution_rows(Q, "pseudo_ce targets");
    return detail::cross_entropy_rows(P, Q) - epsilon * entropy(detail::mean_row(P));
}

/// d pseudo_ce / d P, treating every entry of P as free.
inline DenseMatrix pseudo_ce_grad(const DenseMatrix& P, const DenseMatrix& Q, double epsilon) {
    require(P.same_shape(Q), "pseudo_ce_grad: predictions and targets differ in shape");
    const double inv_n = 1.0 / static_cast<double>(P.rows());
    const Vector mean = detail::mean_row(P);
    DenseMatrix g(P.rows(), P.cols());
    for (std::size_t i = 0; i < P.rows(); ++i)
        for (std::size_t k = 0; k < P.cols(); ++k) {
            const double ce = Q(i, k) == 0.0 ? 0.0 : -Q(i, k) / P(i, k);
            const double ent = mean[k] > 0.0 ? epsilon * (std::log(mean[k]) + 1.0) : 0.0;
            g(i, k) = (ce + ent) * inv_n;
        }
    return g;
}

struct SoftLabelGrad {
    double value = 0.0;
    DenseMatrix d_features;
    DenseMatrix d_prototypes;
};

/// pseudo_ce evaluated on soft_labels(Z, C, tau_s), differentiated through the
/// softmax and both cosine normalizations. Use epsilon = 0 and one-hot targets
/// for the supervised cross-entropy term.
inline SoftLabelGrad soft_label_ce_grad(const DenseMatrix& Z, const DenseMatrix& C, double tau_s, const DenseMatrix& Q,
                                        double epsilon) {
    require(Z.cols() == C.cols(), "soft_label_ce: feature and prototype dimensions differ");
    require(Q.rows() == Z.rows() && Q.cols() == C.rows(), "soft_label_ce: target shape mismatch");
    const DenseMatrix Zn = l2_normalize_rows(Z);
    const DenseMatrix Cn = l2_normalize_rows(C);
    const DenseMatrix P = soft_labels(Z, C, tau_s);

    SoftLabelGrad out;
    out.value = pseudo_ce(P, Q, epsilon);

    const double inv_n = 1.0 / static_cast<double>(P.rows());
    const Vector mean = detail::mean_row(P);
    Vector ent_slope(P.cols(), 0.0);
    for (std::size_t k = 0; k < P.cols(); ++k)
        ent_slope[k] = mean[k] > 0.0 ? std::log(mean[k]) + 1.0 : 0.0;

    // gradient with respect to the cosine logits
    DenseMatrix d_cos(P.rows(), P.cols());
    for (std::size_t i = 0; i < P.rows(); ++i) {
        double q_total = 0.0, p_dot = 0.0;
        for (std::size_t k = 0; k < P.cols(); ++k) {
            q_total += Q(i, k);
            p_dot += P(i, k) * ent_slope[k];
        }
        for (std::size_t k = 0; k < P.cols(); ++k) {
            const double ce = P(i, k) * q_total - Q(i, k);
            const double ent = epsilon * P(i, k) * (ent_slope[k] - p_dot);
            d_cos(i, k) = (ce + ent) * inv_n / tau_s;
        }
    }
    const DenseMatrix d_zn = matmul(d_cos, Cn);
    const DenseMatrix d_cn = matmul_tn(d_cos, Zn);
    out.d_features = l2_normalize_rows_backward(Z, d_zn);
    out.d_prototypes = l2_normalize_rows_backward(C, d_cn);
    return out;
}

// ---------------------------------------------------------------------------
// Hybrid sparse regularization

/// gamma (beta ||W||_1 + (1 - beta)(||W||_{2,1} - ||W||_F^2))
inline double hsr(const DenseMatrix& W, double beta, double gamma) {
    return gamma * (beta * l1_norm(W) + (1.0 - beta) * (l21_norm(W) - frobenius_norm_sq(W)));
}

inline double hsr(std::span<const DenseMatrix> weights, double beta, double gamma) {
    double total = 0.0;
    for (const auto& W : weights) total += hsr(W, beta, gamma);
    return total;
}

/// Subgradient: sign(0) = 0 for the L1 term, zero rows contribute 0 to the
/// L2,1 term.
inline DenseMatrix hsr_grad(const DenseMatrix& W, double beta, double gamma) {
    DenseMatrix g(W.rows(), W.cols());
    for (std::size_t i = 0; i < W.rows(); ++i) {
        const double rn = norm2(W.row(i));
        for (std::size_t j = 0; j < W.cols(); ++j) {
            const double w = W(i, j);
            const double sign = w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
            const double row_term = rn > 0.0 ? w / rn : 0.0;
            g(i, j) = gamma * (beta * sign + (1.0 - beta) * (row_term - 2.0 * w));
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Total objective

struct LossComponents {
    double contrastive = 0.0;  // SimCLR slot (or its replacement)
    double pseudo = 0.0;
    double supcon = 0.0;
    double ce = 0.0;
    double hsr = 0.0;

    double ssl() const { return contrastive + pseudo; }
    double sl() const { return supcon + ce; }
};

/// (1 - lambda) L_SSL + lambda L_SL + L_HSR
inline double combine_total(double l_ssl, double l_sl, double l_hsr, double lambda) {
    require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
    return (1.0 - lambda) * l_ssl + lambda * l_sl + l_hsr;
}

inline double combine_total(const LossComponents& c, double lambda) {
    return combine_total(c.ssl(), c.sl(), c.hsr, lambda);
}

// ---------------------------------------------------------------------------
// Uniform gradient entry point

enum class LossId { info_nce, spectral, ncl, nmf_nce, simclr, supcon, soft_label_ce, hsr };

struct LossInputs {
    ContrastiveBatch batch;
    Activation activation = Activation::relu;  // ncl only
    DenseMatrix features;                      // soft_label_ce: hidden features z
    DenseMatrix prototypes;                    // soft_label_ce
    DenseMatrix targets;                       // soft_label_ce: q rows
    std::vector<DenseMatrix> weights;          // hsr
};

struct LossGradient {
    double value = 0.0;
    DenseMatrix d_anchors;
    DenseMatrix d_candidates;
    DenseMatrix d_features;
    DenseMatrix d_prototypes;
    std::vector<DenseMatrix> d_weights;
};

inline LossGradient grad(LossId id, const LossInputs& in, const LossConfig& cfg) {
    LossGradient out;
    auto from_batch = [&out](BatchGrad&& g) {
        out.value = g.value;
        out.d_anchors = std::move(g.d_anchors);
        out.d_candidates = std::move(g.d_candidates);
    };
    switch (id) {
        case LossId::info_nce: from_batch(info_nce_grad(in.batch, cfg.tau)); break;
        case LossId::spectral: from_batch(spectral_loss_grad(in.batch)); break;
        case LossId::ncl: from_batch(ncl_loss_grad(in.batch, in.activation)); break;
        case LossId::nmf_nce: from_batch(nmf_nce_grad(in.batch, cfg.tau, cfg.mu, cfg.sigma)); break;
        case LossId::simclr: from_batch(simclr_loss_grad(in.batch, cfg.tau)); break;
        case LossId::supcon: from_batch(supcon_loss_grad(in.batch, cfg.tau)); break;
        case LossId::soft_label_ce: {
            auto g = soft_label_ce_grad(in.features, in.prototypes, cfg.tau_s, in.targets, cfg.epsilon_entropy);
            out.value = g.value;
            out.d_features = std::move(g.d_features);
            out.d_prototypes = std::move(g.d_prototypes);
            break;
        }
        case LossId::hsr:
            for (const auto& W : in.weights) {
                out.value += hsr(W, cfg.beta, cfg.gamma);
                out.d_weights.push_back(hsr_grad(W, cfg.beta, cfg.gamma));
            }
            break;
    }
    return out;
}

}  // namespace nngcd

#endif  // NNGCD_LOSSES_HPP
