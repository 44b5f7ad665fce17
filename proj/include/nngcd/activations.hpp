#ifndef NNGCD_ACTIVATIONS_HPP
#define NNGCD_ACTIVATIONS_HPP

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "nngcd/errors.hpp"
#include "nngcd/matrix.hpp"

namespace nngcd {

enum class Activation { identity, relu, gelu, silu, sigmoid };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::gelu: return "gelu";
        case Activation::silu: return "silu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "identity";
}

inline Activation parse_activation(std::string_view name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "gelu") return Activation::gelu;
    if (name == "silu") return Activation::silu;
    if (name == "sigmoid") return Activation::sigmoid;
    throw ValidationError("unknown activation '" + std::string(name) + "'");
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// x * Phi(x), evaluated exactly through erf.
inline double gelu(double x) { return x * normal_cdf(x); }

inline double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double activate(Activation a, double x) {
    switch (a) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::gelu: return gelu(x);
        case Activation::silu: return x * logistic(x);
        case Activation::sigmoid: return logistic(x);
    }
    return x;
}

/// Derivative at x. ReLU uses 0 at the kink.
inline double activate_derivative(Activation a, double x) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::gelu: return normal_cdf(x) + x * normal_pdf(x);
        case Activation::silu: {
            const double s = logistic(x);
            return s * (1.0 + x * (1.0 - s));
        }
        case Activation::sigmoid: {
            const double s = logistic(x);
            return s * (1.0 - s);
        }
    }
    return 1.0;
}

inline DenseMatrix activate(Activation a, const DenseMatrix& m) {
    DenseMatrix out = m;
    for (double& v : out.values()) v = activate(a, v);
    return out;
}

/// upstream o phi'(pre)
inline DenseMatrix activate_backward(Activation a, const DenseMatrix& pre, const DenseMatrix& upstream) {
    require(pre.same_shape(upstream), "activate_backward: shape mismatch");
    DenseMatrix out = upstream;
    auto o = out.values();
    auto p = pre.values();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] *= activate_derivative(a, p[k]);
    return out;
}

}  // namespace nngcd

#endif  // NNGCD_ACTIVATIONS_HPP
