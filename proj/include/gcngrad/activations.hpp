#ifndef GCNGRAD_ACTIVATIONS_HPP
#define GCNGRAD_ACTIVATIONS_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include "gcngrad/kronecker.hpp"
#include "gcngrad/matrix.hpp"

namespace gcngrad {

enum class Activation { identity, sigmoid, relu, leaky_relu, elu, silu };

/// Element-wise activation: a tag plus the parameters the parametric kinds
/// need. leaky_relu defaults to slope 0.01, elu to alpha 1.
struct ActivationKind {
    Activation tag = Activation::identity;
    double slope = 0.01;  // leaky_relu
    double alpha = 1.0;   // elu

    static ActivationKind identity() { return {Activation::identity}; }
    static ActivationKind sigmoid() { return {Activation::sigmoid}; }
    static ActivationKind relu() { return {Activation::relu}; }
    static ActivationKind leaky_relu(double slope = 0.01) {
        if (!(slope > 0.0) || !std::isfinite(slope)) {
            throw std::invalid_argument("leaky_relu: slope must be a finite positive float");
        }
        ActivationKind k{Activation::leaky_relu};
        k.slope = slope;
        return k;
    }
    static ActivationKind elu(double alpha = 1.0) {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) {
            throw std::invalid_argument("elu: alpha must be a finite positive float");
        }
        ActivationKind k{Activation::elu};
        k.alpha = alpha;
        return k;
    }
    static ActivationKind silu() { return {Activation::silu}; }
};

/// Numerically stable sigmoid; the two branches avoid overflow of exp for
/// large |v|.
inline double sigmoid_scalar(double v) {
    if (v >= 0.0) {
        return 1.0 / (1.0 + std::exp(-v));
    }
    const double e = std::exp(v);
    return e / (1.0 + e);
}

inline double activation_value(const ActivationKind& k, double v) {
    switch (k.tag) {
        case Activation::identity: return v;
        case Activation::sigmoid: return sigmoid_scalar(v);
        case Activation::relu: return v > 0.0 ? v : 0.0;
        case Activation::leaky_relu: return v > 0.0 ? v : k.slope * v;
        case Activation::elu: return v > 0.0 ? v : k.alpha * (std::exp(v) - 1.0);
        case Activation::silu: return v * sigmoid_scalar(v);
    }
    throw std::logic_error("activation_value: unknown kind");
}

/// Derivative conventions at the kinks: relu'(0) = 0, leaky_relu'(0) = slope,
/// elu'(0) = alpha. The reverse-mode tape shares these so the two gradient
/// paths stay comparable.
inline double activation_derivative(const ActivationKind& k, double v) {
    switch (k.tag) {
        case Activation::identity: return 1.0;
        case Activation::sigmoid: {
            const double s = sigmoid_scalar(v);
            return s * (1.0 - s);
        }
        case Activation::relu: return v > 0.0 ? 1.0 : 0.0;
        case Activation::leaky_relu: return v > 0.0 ? 1.0 : k.slope;
        case Activation::elu: return v > 0.0 ? 1.0 : k.alpha * std::exp(v);
        case Activation::silu: {
            const double s = sigmoid_scalar(v);
            return s * (1.0 + v * (1.0 - s));
        }
    }
    throw std::logic_error("activation_derivative: unknown kind");
}

/// Sigma(X): sigma applied entrywise, shape preserved.
inline Matrix apply(const ActivationKind& k, const Matrix& x) {
    Matrix y(x.rows(), x.cols());
    for (std::size_t t = 0; t < x.size(); ++t) y.at_flat(t) = activation_value(k, x.at_flat(t));
    return y;
}

/// Sigma'(X): sigma' applied entrywise.
inline Matrix apply_deriv(const ActivationKind& k, const Matrix& x) {
    Matrix y(x.rows(), x.cols());
    for (std::size_t t = 0; t < x.size(); ++t) {
        y.at_flat(t) = activation_derivative(k, x.at_flat(t));
    }
    return y;
}

/// Chain rule for an element-wise activation over a matrix function:
///
///   d Sigma(F(W)) / dW = (J_{p x q} kron Sigma'(F(W))) hadamard dF/dW
///
/// where f is F(W) (m x n) and df the block derivative of F with respect to
/// the p x q variable W. The identity kind returns df bitwise unchanged.
inline BlockDerivative chain_deriv(const ActivationKind& k, const Matrix& f,
                                   const BlockDerivative& df) {
    if (df.inner_rows != f.rows() || df.inner_cols != f.cols()) {
        throw std::invalid_argument("chain_deriv: df inner blocks are " +
                                    std::to_string(df.inner_rows) + "x" +
                                    std::to_string(df.inner_cols) + " but f is " +
                                    std::to_string(f.rows()) + "x" + std::to_string(f.cols()));
    }
    if (k.tag == Activation::identity) return df;
    const Matrix scaled = kron(Matrix::ones(df.outer_rows, df.outer_cols), apply_deriv(k, f));
    return BlockDerivative(df.outer_rows, df.outer_cols, df.inner_rows, df.inner_cols,
                           hadamard(scaled, df.payload));
}

inline ActivationKind activation_from_name(const std::string& name) {
    if (name == "identity") return ActivationKind::identity();
    if (name == "sigmoid") return ActivationKind::sigmoid();
    if (name == "relu") return ActivationKind::relu();
    if (name == "leaky_relu") return ActivationKind::leaky_relu();
    if (name == "elu") return ActivationKind::elu();
    if (name == "silu") return ActivationKind::silu();
    throw std::invalid_argument("unknown activation '" + name + "'");
}

inline std::string activation_name(const ActivationKind& k) {
    switch (k.tag) {
        case Activation::identity: return "identity";
        case Activation::sigmoid: return "sigmoid";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::elu: return "elu";
        case Activation::silu: return "silu";
    }
    return "?";
}

}  // namespace gcngrad

#endif  // GCNGRAD_ACTIVATIONS_HPP
