#ifndef NNGCD_TRAINING_HPP
#define NNGCD_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nngcd/activations.hpp"
#include "nngcd/clustering.hpp"
#include "nngcd/cooccurrence.hpp"
#include "nngcd/data.hpp"
#include "nngcd/encoder.hpp"
#include "nngcd/errors.hpp"
#include "nngcd/losses.hpp"
#include "nngcd/matrix.hpp"

namespace nngcd {

enum class ContrastiveVariant { info_nce, nmf_nce, spectral, ncl };

inline std::string_view to_string(ContrastiveVariant v) {
    switch (v) {
        case ContrastiveVariant::info_nce: return "info_nce";
        case ContrastiveVariant::nmf_nce: return "nmf_nce";
        case ContrastiveVariant::spectral: return "spectral";
        case ContrastiveVariant::ncl: return "ncl";
    }
    return "info_nce";
}

inline ContrastiveVariant parse_variant(std::string_view name) {
    if (name == "info_nce") return ContrastiveVariant::info_nce;
    if (name == "nmf_nce") return ContrastiveVariant::nmf_nce;
    if (name == "spectral") return ContrastiveVariant::spectral;
    if (name == "ncl") return ContrastiveVariant::ncl;
    throw ValidationError("unknown contrastive_variant '" + std::string(name) + "'");
}

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    double lr = 0.1;
    std::uint64_t seed = 0;
    LossConfig loss;
    EmaSchedule ema;  // total_steps is filled in by train()
    ContrastiveVariant contrastive_variant = ContrastiveVariant::nmf_nce;
    Activation activation = Activation::gelu;
    Activation head_activation = Activation::gelu;
    std::vector<std::size_t> hidden_dims{64, 32};
    std::vector<std::size_t> head_dims{16};
    double jitter_std = 0.05;
    std::size_t eval_restarts = 10;
    double sparsity_threshold = 0.05;

    void validate() const {
        require(batch_size >= 2, "batch_size must be at least 2");
        require(lr > 0.0, "lr must be positive");
        require(jitter_std >= 0.0, "jitter_std must be non-negative");
        require(eval_restarts >= 1, "eval_restarts must be at least 1");
        require(!head_dims.empty(), "head_dims needs at least one layer");
        loss.validate();
        ema.validate();
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"seed", c.seed},
            {"lambda_balance", c.loss.lambda_balance},
            {"tau", c.loss.tau},
            {"tau_s", c.loss.tau_s},
            {"tau_t", c.loss.tau_t},
            {"mu", c.loss.mu},
            {"sigma", c.loss.sigma},
            {"epsilon_entropy", c.loss.epsilon_entropy},
            {"beta", c.loss.beta},
            {"gamma", c.loss.gamma},
            {"hsr_on_prototypes", c.loss.hsr_on_prototypes},
            {"omega_min", c.ema.omega_min},
            {"omega_max", c.ema.omega_max},
            {"contrastive_variant", to_string(c.contrastive_variant)},
            {"activation", to_string(c.activation)},
            {"head_activation", to_string(c.head_activation)},
            {"hidden_dims", c.hidden_dims},
            {"head_dims", c.head_dims},
            {"jitter_std", c.jitter_std},
            {"eval_restarts", c.eval_restarts},
            {"sparsity_threshold", c.sparsity_threshold}};
}

/// Flat JSON object; every key is optional and unknown keys are rejected.
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    require(j.is_object(), "config: expected a JSON object");
    TrainConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "epochs") c.epochs = value.get<std::size_t>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "lr") c.lr = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "lambda_balance") c.loss.lambda_balance = value.get<double>();
            else if (key == "tau") c.loss.tau = value.get<double>();
            else if (key == "tau_s") c.loss.tau_s = value.get<double>();
            else if (key == "tau_t") c.loss.tau_t = value.get<double>();
            else if (key == "mu") c.loss.mu = value.get<double>();
            else if (key == "sigma") c.loss.sigma = value.get<double>();
            else if (key == "epsilon_entropy") c.loss.epsilon_entropy = value.get<double>();
            else if (key == "beta") c.loss.beta = value.get<double>();
            else if (key == "gamma") c.loss.gamma = value.get<double>();
            else if (key == "hsr_on_prototypes") c.loss.hsr_on_prototypes = value.get<bool>();
            else if (key == "omega_min") c.ema.omega_min = value.get<double>();
            else if (key == "omega_max") c.ema.omega_max = value.get<double>();
            else if (key == "contrastive_variant") c.contrastive_variant = parse_variant(value.get<std::string>());
            else if (key == "activation") c.activation = parse_activation(value.get<std::string>());
            else if (key == "head_activation") c.head_activation = parse_activation(value.get<std::string>());
            else if (key == "hidden_dims") c.hidden_dims = value.get<std::vector<std::size_t>>();
            else if (key == "head_dims") c.head_dims = value.get<std::vector<std::size_t>>();
            else if (key == "jitter_std") c.jitter_std = value.get<double>();
            else if (key == "eval_restarts") c.eval_restarts = value.get<std::size_t>();
            else if (key == "sparsity_threshold") c.sparsity_threshold = value.get<double>();
            else throw ValidationError("config: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

/// lr0 (1 + cos(pi t / T)) / 2
inline double cosine_lr(double lr0, std::size_t t, std::size_t T) {
    require(T > 0, "cosine_lr: total steps must be positive");
    require(t <= T, "cosine_lr: step beyond schedule");
    return lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(T))) / 2.0;
}

/// Rows scaled to unit norm; the encoder always sees inputs in this form.
inline DenseMatrix prepare_inputs(const DenseMatrix& X) { return l2_normalize_rows(X); }

// ---------------------------------------------------------------------------
// Objective

struct ObjectiveResult {
    LossComponents components;
    double total = 0.0;
    ParamGrads grads;
    std::size_t supcon_excluded = 0;
};

/// Total objective on one mini-batch given two views, plus gradients with
/// respect to the student parameters. labels[i] is the class of sample i if
/// it is labeled, else -1. The teacher only produces pseudo-label targets.
inline ObjectiveResult total_loss_grad(const EncoderParams& student, const EncoderParams& teacher,
                                       const DenseMatrix& view1, const DenseMatrix& view2,
                                       const std::vector<int>& labels, const TrainConfig& cfg) {
    require(view1.same_shape(view2), "total_loss: views differ in shape");
    require(labels.size() == view1.rows(), "total_loss: one label slot per sample required");
    const LossConfig& lc = cfg.loss;
    const double lambda = lc.lambda_balance;
    const std::size_t B = view1.rows();
    const std::size_t K = student.prototypes.rows();
    require(K > 0, "total_loss: encoder has no prototypes");

    ObjectiveResult r;
    r.grads = zero_grads(student);
    const ForwardCache c1 = forward_batch(student, view1);
    const ForwardCache c2 = forward_batch(student, view2);
    const std::size_t d_out = student.output_dim();
    DenseMatrix d_out1(B, d_out), d_out2(B, d_out);
    DenseMatrix d_pre1, d_pre2;

    // SimCLR slot and SupCon on unit-normalized head outputs
    const bool cosine_slot =
        cfg.contrastive_variant == ContrastiveVariant::info_nce || cfg.contrastive_variant == ContrastiveVariant::nmf_nce;
    const DenseMatrix u1 = l2_normalize_rows_stable(c1.output);
    const DenseMatrix u2 = l2_normalize_rows_stable(c2.output);
    DenseMatrix d_u1(B, d_out), d_u2(B, d_out);

    if (cosine_slot) {
        const auto batch = ContrastiveBatch::cross_view(u1, u2);
        BatchGrad g = cfg.contrastive_variant == ContrastiveVariant::info_nce
                          ? simclr_loss_grad(batch, lc.tau)
                          : nmf_nce_grad(batch, lc.tau, lc.mu, lc.sigma);
        r.components.contrastive = g.value;
        d_u1 += g.d_anchors * (1.0 - lambda);
        d_u2 += g.d_candidates * (1.0 - lambda);
    } else if (cfg.contrastive_variant == ContrastiveVariant::spectral) {
        const auto batch = ContrastiveBatch::cross_view(c1.head_pre(), c2.head_pre());
        BatchGrad g = spectral_loss_grad(batch);
        r.components.contrastive = g.value;
        d_pre1 = g.d_anchors * (1.0 - lambda);
        d_pre2 = g.d_candidates * (1.0 - lambda);
    } else {
        const auto batch = ContrastiveBatch::cross_view(c1.head_pre(), c2.head_pre());
        BatchGrad g = ncl_loss_grad(batch, student.head_activation);
        r.components.contrastive = g.value;
        d_pre1 = g.d_anchors * (1.0 - lambda);
        d_pre2 = g.d_candidates * (1.0 - lambda);
    }

    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < B; ++i)
        if (labels[i] >= 0) labeled.push_back(i);

    if (!labeled.empty() && lambda > 0.0) {
        const auto batch = ContrastiveBatch::cross_view(u1, u2, labels);
        SupConGrad g = supcon_loss_grad(batch, lc.tau);
        r.components.supcon = g.value;
        r.supcon_excluded = g.excluded_anchors;
        d_u1 += g.d_anchors * lambda;
        d_u2 += g.d_candidates * lambda;
    }
    d_out1 += l2_normalize_rows_stable_backward(c1.output, d_u1);
    d_out2 += l2_normalize_rows_stable_backward(c2.output, d_u2);

    // pseudo-labels: teacher on the opposite view at the sharper temperature
    DenseMatrix Z(2 * B, student.hidden_dim());
    for (std::size_t i = 0; i < B; ++i) {
        std::copy_n(c1.hidden.row(i).begin(), Z.cols(), Z.row(i).begin());
        std::copy_n(c2.hidden.row(i).begin(), Z.cols(), Z.row(B + i).begin());
    }
    const DenseMatrix t1 = embed(teacher, view1);
    const DenseMatrix t2 = embed(teacher, view2);
    DenseMatrix Q(2 * B, K);
    for (std::size_t i = 0; i < B; ++i) {
        const Vector q1 = soft_labels(t2.row(i), teacher.prototypes, lc.tau_t);
        const Vector q2 = soft_labels(t1.row(i), teacher.prototypes, lc.tau_t);
        std::copy(q1.begin(), q1.end(), Q.row(i).begin());
        std::copy(q2.begin(), q2.end(), Q.row(B + i).begin());
    }
    SoftLabelGrad pseudo = soft_label_ce_grad(Z, student.prototypes, lc.tau_s, Q, lc.epsilon_entropy);
    r.components.pseudo = pseudo.value;
    DenseMatrix dZ = pseudo.d_features * (1.0 - lambda);
    r.grads.prototypes += pseudo.d_prototypes * (1.0 - lambda);

    if (!labeled.empty() && lambda > 0.0) {
        std::vector<std::size_t> rows;
        for (std::size_t i : labeled) rows.push_back(i);
        for (std::size_t i : labeled) rows.push_back(B + i);
        const DenseMatrix Zl = gather_rows(Z, rows);
        DenseMatrix Y(rows.size(), K);
        for (std::size_t r_i = 0; r_i < rows.size(); ++r_i) {
            const int cls = labels[rows[r_i] % B];
            require(static_cast<std::size_t>(cls) < K, "total_loss: label exceeds prototype count");
            Y(r_i, static_cast<std::size_t>(cls)) = 1.0;
        }
        SoftLabelGrad ce = soft_label_ce_grad(Zl, student.prototypes, lc.tau_s, Y, 0.0);
        r.components.ce = ce.value;
        r.grads.prototypes += ce.d_prototypes * lambda;
        for (std::size_t r_i = 0; r_i < rows.size(); ++r_i) {
            auto dst = dZ.row(rows[r_i]);
            auto src = ce.d_features.row(r_i);
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += lambda * src[k];
        }
    }

    DenseMatrix dz1(B, Z.cols()), dz2(B, Z.cols());
    for (std::size_t i = 0; i < B; ++i) {
        std::copy_n(dZ.row(i).begin(), Z.cols(), dz1.row(i).begin());
        std::copy_n(dZ.row(B + i).begin(), Z.cols(), dz2.row(i).begin());
    }

    // sparse regularization on the projection head
    for (std::size_t l = student.backbone_layers; l < student.layer_weights.size(); ++l) {
        r.components.hsr += hsr(student.layer_weights[l], lc.beta, lc.gamma);
        r.grads.weights[l] += hsr_grad(student.layer_weights[l], lc.beta, lc.gamma);
    }
    if (lc.hsr_on_prototypes) {
        r.components.hsr += hsr(student.prototypes, lc.beta, lc.gamma);
        r.grads.prototypes += hsr_grad(student.prototypes, lc.beta, lc.gamma);
    }

    backward(student, c1, d_out1, d_pre1, dz1, r.grads);
    backward(student, c2, d_out2, d_pre2, dz2, r.grads);
    r.total = combine_total(r.components, lambda);
    return r;
}

inline void sgd_step(EncoderParams& p, const ParamGrads& g, double lr) {
    for (std::size_t l = 0; l < p.layer_weights.size(); ++l) {
        p.layer_weights[l] -= g.weights[l] * lr;
        for (std::size_t j = 0; j < p.layer_biases[l].size(); ++j) p.layer_biases[l][j] -= lr * g.biases[l][j];
    }
    p.prototypes -= g.prototypes * lr;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
    AccReport acc;
    BlockDiagnostics diagnostics;
};

namespace detail {

// Cosine similarity that maps zero-norm rows to zero similarity.
inline DenseMatrix cosine_similarity_lenient(const DenseMatrix& F) {
    Vector norms(F.rows());
    for (std::size_t i = 0; i < F.rows(); ++i) norms[i] = norm2(F.row(i));
    DenseMatrix S(F.rows(), F.rows());
    for (std::size_t i = 0; i < F.rows(); ++i)
        for (std::size_t j = i; j < F.rows(); ++j) {
            const double denom = norms[i] * norms[j];
            S(i, j) = S(j, i) = denom > 0.0 ? dot(F.row(i), F.row(j)) / denom : 0.0;
        }
    return S;
}

}  // namespace detail

/// Embeds the unlabeled samples with the hidden feature z, clusters them with
/// K-means and scores the result against ground truth.
inline EvalReport evaluate(const EncoderParams& params, const GcdDataset& data, std::size_t K,
                           std::size_t restarts = 10, std::uint64_t seed = 0, double threshold = 0.05) {
    const auto idx = data.unlabeled_indices();
    require(!idx.empty(), "evaluate: no unlabeled samples");
    require(K >= 1 && K <= idx.size(), "evaluate: K out of range");
    const DenseMatrix Z = embed(params, prepare_inputs(gather_rows(data.X, idx)));
    check_finite(Z, "evaluate");
    const auto clusters = kmeans(Z, K, restarts, seed);
    std::vector<int> truth;
    std::vector<bool> old_mask;
    for (std::size_t i : idx) {
        truth.push_back(data.y[i]);
        old_mask.push_back(data.old_mask[i]);
    }
    EvalReport report;
    report.acc = acc(truth, clusters.assignment.labels, old_mask);
    report.diagnostics = block_diagnostics(detail::cosine_similarity_lenient(Z), old_mask, threshold);
    return report;
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const EvalReport& e) {
    return {{"acc_all", e.acc.acc_all},
            {"acc_old", optional_json(e.acc.acc_old)},
            {"acc_new", optional_json(e.acc.acc_new)},
            {"permutation", e.acc.permutation},
            {"intra_base_sparsity", optional_json(e.diagnostics.intra_base_sparsity)},
            {"intra_novel_sparsity", optional_json(e.diagnostics.intra_novel_sparsity)},
            {"insulation_mean", optional_json(e.diagnostics.insulation_mean)}};
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainReport {
    std::vector<double> loss_history;
    std::vector<double> acc_all;
    std::vector<std::optional<double>> acc_old;
    std::vector<std::optional<double>> acc_new;
    std::vector<double> dead_neuron_fraction;
    std::vector<std::optional<double>> insulation_mean;
    EvalReport initial;
    EvalReport final;
    std::size_t steps = 0;
    std::size_t ema_clamped_steps = 0;
    std::size_t supcon_excluded_anchors = 0;
    double mean_head_l1 = 0.0;
};

struct TrainResult {
    EncoderParams params;
    EncoderParams teacher;
    TrainReport report;
};

inline nlohmann::json to_json(const TrainReport& r) {
    auto opt_list = [](const std::vector<std::optional<double>>& v) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& x : v) out.push_back(optional_json(x));
        return out;
    };
    return {{"loss_history", r.loss_history},
            {"acc_all", r.acc_all},
            {"acc_old", opt_list(r.acc_old)},
            {"acc_new", opt_list(r.acc_new)},
            {"dead_neuron_fraction", r.dead_neuron_fraction},
            {"insulation_mean", opt_list(r.insulation_mean)},
            {"initial", to_json(r.initial)},
            {"final", to_json(r.final)},
            {"steps", r.steps},
            {"ema_clamped_steps", r.ema_clamped_steps},
            {"supcon_excluded_anchors", r.supcon_excluded_anchors},
            {"mean_head_l1", r.mean_head_l1}};
}

namespace detail {

inline double mean_head_l1(const EncoderParams& p) {
    const auto head = p.head_weights();
    double total = 0.0;
    for (const auto& W : head) total += l1_norm(W);
    return total / static_cast<double>(head.size());
}

inline std::string describe(const LossComponents& c) {
    std::ostringstream s;
    s << "contrastive=" << c.contrastive << " pseudo=" << c.pseudo << " supcon=" << c.supcon << " ce=" << c.ce
      << " hsr=" << c.hsr;
    return s.str();
}

inline bool params_finite(const EncoderParams& p) {
    for (const auto& W : p.layer_weights)
        if (!all_finite(W.values())) return false;
    for (const auto& b : p.layer_biases)
        if (!all_finite(b)) return false;
    return all_finite(p.prototypes.values());
}

}  // namespace detail

/// Mini-batch SGD on the total objective with an EMA teacher. Two views per
/// sample are drawn as Gaussian jitter around the row-normalized features.
/// Deterministic for a given config (shuffle and jitter share one seeded
/// stream).
inline TrainResult train(const GcdDataset& data, TrainConfig cfg) {
    data.validate();
    cfg.validate();
    const std::size_t N = data.size();
    require(cfg.batch_size <= N, "batch_size " + std::to_string(cfg.batch_size) + " exceeds dataset size " +
                                     std::to_string(N));
    const std::size_t K = data.num_classes();
    const DenseMatrix X = prepare_inputs(data.X);

    EncoderArchitecture arch;
    arch.input_dim = X.cols();
    arch.hidden_dims = cfg.hidden_dims;
    arch.head_dims = cfg.head_dims;
    arch.num_prototypes = K;
    arch.activation = cfg.activation;
    arch.head_activation = cfg.head_activation;

    TrainResult result;
    result.params = make_encoder(arch, cfg.seed);
    result.teacher = result.params;
    EncoderParams& student = result.params;
    EncoderParams& teacher = result.teacher;
    TrainReport& report = result.report;

    const std::size_t steps_per_epoch = N / cfg.batch_size;
    const std::size_t total_steps = cfg.epochs * steps_per_epoch;
    cfg.ema.total_steps = total_steps;
    report.steps = total_steps;

    const std::uint64_t eval_seed = cfg.seed;
    report.initial = evaluate(student, data, K, cfg.eval_restarts, eval_seed, cfg.sparsity_threshold);

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);

    std::size_t t = 0;
    LossComponents last{};
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s, ++t) {
            const std::span<const std::size_t> batch_idx(order.data() + s * cfg.batch_size, cfg.batch_size);
            const DenseMatrix base = gather_rows(X, batch_idx);
            DenseMatrix v1 = base, v2 = base;
            for (double& v : v1.values()) v += cfg.jitter_std * jitter(rng);
            for (double& v : v2.values()) v += cfg.jitter_std * jitter(rng);
            std::vector<int> labels(cfg.batch_size, -1);
            for (std::size_t i = 0; i < cfg.batch_size; ++i)
                if (data.labeled_mask[batch_idx[i]]) labels[i] = data.y[batch_idx[i]];

            ObjectiveResult obj = total_loss_grad(student, teacher, v1, v2, labels, cfg);
            if (!std::isfinite(obj.total)) {
                throw NumericError("non-finite loss at step " + std::to_string(t) + ": " +
                                   detail::describe(obj.components));
            }
            last = obj.components;
            report.supcon_excluded_anchors += obj.supcon_excluded;
            epoch_loss += obj.total;
            sgd_step(student, obj.grads, cosine_lr(cfg.lr, t, total_steps));
            if (!detail::params_finite(student)) {
                throw NumericError("non-finite parameters after step " + std::to_string(t) + ": " +
                                   detail::describe(obj.components));
            }

            const double raw = ema_omega_raw(cfg.ema, t);
            if (raw < cfg.ema.omega_min || raw > cfg.ema.omega_max) ++report.ema_clamped_steps;
            teacher = ema_update(teacher, student, ema_omega(cfg.ema, t));
        }
        report.loss_history.push_back(steps_per_epoch ? epoch_loss / static_cast<double>(steps_per_epoch) : 0.0);

        EvalReport e;
        try {
            e = evaluate(student, data, K, cfg.eval_restarts, eval_seed, cfg.sparsity_threshold);
        } catch (const NumericError& err) {
            throw NumericError(std::string(err.what()) + " after step " + std::to_string(t - 1) + ": " +
                               detail::describe(last));
        }
        report.acc_all.push_back(e.acc.acc_all);
        report.acc_old.push_back(e.acc.acc_old);
        report.acc_new.push_back(e.acc.acc_new);
        report.insulation_mean.push_back(e.diagnostics.insulation_mean);
        report.dead_neuron_fraction.push_back(dead_neuron_fraction(student, X));
        report.final = e;
    }
    if (cfg.epochs == 0) report.final = report.initial;
    report.mean_head_l1 = detail::mean_head_l1(student);
    return result;
}

}  // namespace nngcd

#endif  // NNGCD_TRAINING_HPP
