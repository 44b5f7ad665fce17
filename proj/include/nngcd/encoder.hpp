#ifndef NNGCD_ENCODER_HPP
#define NNGCD_ENCODER_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "nngcd/activations.hpp"
#include "nngcd/errors.hpp"
#include "nngcd/io.hpp"
#include "nngcd/matrix.hpp"

namespace nngcd {

/// MLP encoder f = g o F with a non-negative head phi and a prototype
/// classifier over the hidden feature z = F(x).
///
/// Layer l maps rows as y = phi_l(x W_l + b_l) with W_l stored (in x out). The
/// first `backbone_layers` layers form F and use `activation`; the remaining
/// layers form the projection head g, whose last layer uses `head_activation`.
struct EncoderParams {
    std::vector<DenseMatrix> layer_weights;
    std::vector<Vector> layer_biases;
    std::size_t backbone_layers = 0;
    Activation activation = Activation::gelu;
    Activation head_activation = Activation::gelu;
    DenseMatrix prototypes;  // K x hidden_dim

    std::size_t input_dim() const { return layer_weights.empty() ? 0 : layer_weights.front().rows(); }
    std::size_t hidden_dim() const {
        return backbone_layers == 0 ? input_dim() : layer_weights[backbone_layers - 1].cols();
    }
    std::size_t output_dim() const { return layer_weights.empty() ? 0 : layer_weights.back().cols(); }
    std::size_t head_layers() const { return layer_weights.size() - backbone_layers; }

    Activation layer_activation(std::size_t l) const {
        return l + 1 == layer_weights.size() && l >= backbone_layers ? head_activation : activation;
    }

    void validate() const {
        require(!layer_weights.empty(), "encoder: no layers");
        require(layer_weights.size() == layer_biases.size(), "encoder: one bias per layer required");
        require(backbone_layers < layer_weights.size(), "encoder: projection head needs at least one layer");
        for (std::size_t l = 0; l < layer_weights.size(); ++l) {
            require(layer_biases[l].size() == layer_weights[l].cols(),
                    "encoder: bias " + std::to_string(l) + " does not match layer width");
            if (l > 0)
                require(layer_weights[l].rows() == layer_weights[l - 1].cols(),
                        "encoder: layer " + std::to_string(l) + " does not chain with its predecessor");
        }
        require(prototypes.empty() || prototypes.cols() == hidden_dim(), "encoder: prototype dimension mismatch");
    }

    bool same_shape(const EncoderParams& o) const {
        if (layer_weights.size() != o.layer_weights.size() || backbone_layers != o.backbone_layers) return false;
        for (std::size_t l = 0; l < layer_weights.size(); ++l)
            if (!layer_weights[l].same_shape(o.layer_weights[l]) || layer_biases[l].size() != o.layer_biases[l].size())
                return false;
        return prototypes.same_shape(o.prototypes);
    }

    /// Weight matrices of the projection head.
    std::span<const DenseMatrix> head_weights() const {
        return std::span<const DenseMatrix>(layer_weights).subspan(backbone_layers);
    }

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

struct EncoderArchitecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims{64, 32};
    std::vector<std::size_t> head_dims{16};
    std::size_t num_prototypes = 0;
    Activation activation = Activation::gelu;
    Activation head_activation = Activation::gelu;
};

/// Weights uniform on (-a, a), a = sqrt(6 / (fan_in + fan_out)); zero biases.
inline EncoderParams make_encoder(const EncoderArchitecture& arch, std::uint64_t seed) {
    require(arch.input_dim > 0, "encoder: input dimension must be positive");
    require(!arch.head_dims.empty(), "encoder: projection head needs at least one layer");
    std::mt19937_64 rng(seed);
    EncoderParams p;
    p.activation = arch.activation;
    p.head_activation = arch.head_activation;
    p.backbone_layers = arch.hidden_dims.size();
    std::vector<std::size_t> widths{arch.input_dim};
    widths.insert(widths.end(), arch.hidden_dims.begin(), arch.hidden_dims.end());
    widths.insert(widths.end(), arch.head_dims.begin(), arch.head_dims.end());
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const double a = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
        std::uniform_real_distribution<double> dist(-a, a);
        DenseMatrix W(widths[l], widths[l + 1]);
        for (double& v : W.values()) v = dist(rng);
        p.layer_weights.push_back(std::move(W));
        p.layer_biases.emplace_back(widths[l + 1], 0.0);
    }
    if (arch.num_prototypes > 0) {
        const std::size_t d = p.hidden_dim();
        const double a = std::sqrt(6.0 / static_cast<double>(arch.num_prototypes + d));
        std::uniform_real_distribution<double> dist(-a, a);
        p.prototypes = DenseMatrix(arch.num_prototypes, d);
        for (double& v : p.prototypes.values()) v = dist(rng);
    }
    p.validate();
    return p;
}

/// Per-layer inputs and pre-activations of a batch forward pass.
struct ForwardCache {
    std::vector<DenseMatrix> inputs;
    std::vector<DenseMatrix> pre;
    DenseMatrix hidden;  // z = F(x)
    DenseMatrix output;  // phi(g(z))

    const DenseMatrix& head_pre() const { return pre.back(); }
};

inline ForwardCache forward_batch(const EncoderParams& p, const DenseMatrix& X) {
    require(X.cols() == p.input_dim(), "forward: input dimension " + std::to_string(X.cols()) + " != " +
                                           std::to_string(p.input_dim()));
    ForwardCache cache;
    DenseMatrix current = X;
    if (p.backbone_layers == 0) cache.hidden = X;
    for (std::size_t l = 0; l < p.layer_weights.size(); ++l) {
        DenseMatrix pre = matmul(current, p.layer_weights[l]);
        for (std::size_t i = 0; i < pre.rows(); ++i) {
            auto r = pre.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) r[j] += p.layer_biases[l][j];
        }
        cache.inputs.push_back(std::move(current));
        current = activate(p.layer_activation(l), pre);
        cache.pre.push_back(std::move(pre));
        if (l + 1 == p.backbone_layers) cache.hidden = current;
    }
    cache.output = std::move(current);
    return cache;
}

/// Hidden feature only (no head).
inline DenseMatrix embed(const EncoderParams& p, const DenseMatrix& X) {
    require(X.cols() == p.input_dim(), "embed: input dimension mismatch");
    DenseMatrix current = X;
    for (std::size_t l = 0; l < p.backbone_layers; ++l) {
        DenseMatrix pre = matmul(current, p.layer_weights[l]);
        for (std::size_t i = 0; i < pre.rows(); ++i) {
            auto r = pre.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) r[j] += p.layer_biases[l][j];
        }
        current = activate(p.activation, pre);
    }
    return current;
}

/// phi(g(F(x))) when use_head, else z = F(x).
inline Vector forward(const EncoderParams& p, std::span<const double> x, bool use_head) {
    const DenseMatrix X = DenseMatrix::from_row(x);
    const DenseMatrix out = use_head ? forward_batch(p, X).output : embed(p, X);
    return {out.values().begin(), out.values().end()};
}

struct ParamGrads {
    std::vector<DenseMatrix> weights;
    std::vector<Vector> biases;
    DenseMatrix prototypes;
};

inline ParamGrads zero_grads(const EncoderParams& p) {
    ParamGrads g;
    for (std::size_t l = 0; l < p.layer_weights.size(); ++l) {
        g.weights.emplace_back(p.layer_weights[l].rows(), p.layer_weights[l].cols());
        g.biases.emplace_back(p.layer_biases[l].size(), 0.0);
    }
    g.prototypes = DenseMatrix(p.prototypes.rows(), p.prototypes.cols());
    return g;
}

/// Backpropagates upstream gradients into `grads`. Each upstream argument may
/// be empty (no contribution): d_output is with respect to phi(g(z)),
/// d_head_pre with respect to the last pre-activation, d_hidden with respect
/// to z.
inline void backward(const EncoderParams& p, const ForwardCache& cache, const DenseMatrix& d_output,
                     const DenseMatrix& d_head_pre, const DenseMatrix& d_hidden, ParamGrads& grads) {
    const std::size_t L = p.layer_weights.size();
    const std::size_t batch = cache.inputs.front().rows();
    DenseMatrix upstream(batch, p.output_dim());  // gradient w.r.t. output of current layer
    if (!d_output.empty()) upstream += d_output;
    for (std::size_t l = L; l-- > 0;) {
        DenseMatrix d_pre = activate_backward(p.layer_activation(l), cache.pre[l], upstream);
        if (l + 1 == L && !d_head_pre.empty()) d_pre += d_head_pre;
        grads.weights[l] += matmul_tn(cache.inputs[l], d_pre);
        for (std::size_t i = 0; i < d_pre.rows(); ++i)
            for (std::size_t j = 0; j < d_pre.cols(); ++j) grads.biases[l][j] += d_pre(i, j);
        if (l == 0) break;
        upstream = matmul_nt(d_pre, p.layer_weights[l]);
        if (l == p.backbone_layers && !d_hidden.empty()) upstream += d_hidden;
    }
}

// ---------------------------------------------------------------------------
// EMA teacher

struct EmaSchedule {
    double omega_min = 0.7;
    double omega_max = 0.99;
    std::size_t total_steps = 0;

    void validate() const {
        require(0.0 <= omega_min && omega_min <= omega_max && omega_max <= 1.0,
                "EMA schedule needs 0 <= omega_min <= omega_max <= 1");
    }
};

/// omega_max - (1 - omega_min) cos(pi t / (T + 1)) / 2, before clamping.
inline double ema_omega_raw(const EmaSchedule& s, std::size_t t) {
    require(t <= s.total_steps, "ema_omega: step " + std::to_string(t) + " outside [0, " +
                                    std::to_string(s.total_steps) + "]");
    return s.omega_max - (1.0 - s.omega_min) *
                             std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(s.total_steps + 1)) /
                             2.0;
}

/// Schedule value clamped into [omega_min, omega_max].
inline double ema_omega(const EmaSchedule& s, std::size_t t) {
    s.validate();
    return std::clamp(ema_omega_raw(s, t), s.omega_min, s.omega_max);
}

/// teacher <- omega teacher + (1 - omega) student, for every parameter.
inline EncoderParams ema_update(const EncoderParams& teacher, const EncoderParams& student, double omega) {
    require(teacher.same_shape(student), "ema_update: teacher and student shapes differ");
    require(omega >= 0.0 && omega <= 1.0, "ema_update: omega must lie in [0, 1]");
    EncoderParams out = teacher;
    auto mix = [omega](std::span<double> t, std::span<const double> s) {
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = omega * t[k] + (1.0 - omega) * s[k];
    };
    for (std::size_t l = 0; l < out.layer_weights.size(); ++l) {
        mix(out.layer_weights[l].values(), student.layer_weights[l].values());
        mix(out.layer_biases[l], student.layer_biases[l]);
    }
    mix(out.prototypes.values(), student.prototypes.values());
    return out;
}

/// Fraction of head output dimensions whose activation magnitude is at most
/// 1e-12 for every sample.
inline double dead_neuron_fraction(const EncoderParams& p, const DenseMatrix& X) {
    require(X.rows() > 0, "dead_neuron_fraction: empty dataset");
    const DenseMatrix out = forward_batch(p, X).output;
    std::size_t dead = 0;
    for (std::size_t j = 0; j < out.cols(); ++j) {
        bool all_zero = true;
        for (std::size_t i = 0; i < out.rows() && all_zero; ++i) all_zero = std::abs(out(i, j)) <= 1e-12;
        dead += all_zero;
    }
    return static_cast<double>(dead) / static_cast<double>(out.cols());
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json to_json(const EncoderParams& p) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < p.layer_weights.size(); ++l) {
        nlohmann::json layer = io::matrix_to_json(p.layer_weights[l]);
        layer["bias"] = p.layer_biases[l];
        layers.push_back(std::move(layer));
    }
    return {{"backbone_layers", p.backbone_layers},
            {"activation", to_string(p.activation)},
            {"head_activation", to_string(p.head_activation)},
            {"layers", std::move(layers)},
            {"prototypes", io::matrix_to_json(p.prototypes)}};
}

inline EncoderParams encoder_from_json(const nlohmann::json& j) {
    EncoderParams p;
    try {
        p.backbone_layers = j.at("backbone_layers").get<std::size_t>();
        p.activation = parse_activation(j.at("activation").get<std::string>());
        p.head_activation = parse_activation(j.at("head_activation").get<std::string>());
        for (const auto& layer : j.at("layers")) {
            p.layer_weights.push_back(io::matrix_from_json(layer));
            p.layer_biases.push_back(layer.at("bias").get<Vector>());
        }
        p.prototypes = io::matrix_from_json(j.at("prototypes"));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint: ") + e.what());
    }
    p.validate();
    return p;
}

}  // namespace nngcd

#endif  // NNGCD_ENCODER_HPP
