#ifndef GCNGRAD_GCN_HPP
#define GCNGRAD_GCN_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcngrad/activations.hpp"
#include "gcngrad/graph.hpp"
#include "gcngrad/matrix.hpp"

namespace gcngrad {

enum class Task { node, link };

/// A d-layer GCN: H_s = Sigma_s(P H_{s-1} W_s), with output
///   node:  Yhat = Sigma_{d+1}(H_d)          (n_d must be 1)
///   link:  Yhat = Sigma_{d+1}(H_d H_d^T)
///
/// dims holds n_0..n_d; weights[k] is W_{k+1} of shape dims[k] x dims[k+1];
/// activations[k] is Sigma_{k+1}, so activations has d+1 entries. The
/// propagation matrix P is the raw adjacency for node tasks (the normalized
/// one only when explicitly requested) and the normalized adjacency for link
/// tasks.
struct GcnModel {
    Task task = Task::node;
    std::vector<std::size_t> dims;
    std::vector<Matrix> weights;
    std::vector<ActivationKind> activations;
    bool use_normalized_adjacency = false;  // node tasks only; link always normalizes

    std::size_t depth() const { return weights.size(); }
};

inline void validate_model(const GcnModel& m) {
    if (m.dims.size() < 2) throw std::invalid_argument("model: dims must list n_0..n_d, d >= 1");
    const std::size_t d = m.dims.size() - 1;
    if (m.weights.size() != d) {
        throw std::invalid_argument("model: expected " + std::to_string(d) + " weight matrices, got " +
                                    std::to_string(m.weights.size()));
    }
    if (m.activations.size() != d + 1) {
        throw std::invalid_argument("model: expected " + std::to_string(d + 1) +
                                    " activations (Sigma_1..Sigma_{d+1}), got " +
                                    std::to_string(m.activations.size()));
    }
    for (std::size_t k = 0; k < d; ++k) {
        if (m.weights[k].rows() != m.dims[k] || m.weights[k].cols() != m.dims[k + 1]) {
            throw std::invalid_argument("model: W" + std::to_string(k + 1) + " is " +
                                        std::to_string(m.weights[k].rows()) + "x" +
                                        std::to_string(m.weights[k].cols()) + ", expected " +
                                        std::to_string(m.dims[k]) + "x" +
                                        std::to_string(m.dims[k + 1]));
        }
    }
    if (m.task == Task::node && m.dims.back() != 1) {
        throw std::invalid_argument("model: node classification requires n_d = 1");
    }
}

inline std::uint64_t model_fingerprint(const GcnModel& m) {
    // FNV-1a over the structural fields and weight bytes.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    };
    mix(m.task == Task::node ? 1 : 2);
    mix(m.use_normalized_adjacency ? 1 : 0);
    for (std::size_t dim : m.dims) mix(dim);
    for (const auto& a : m.activations) {
        mix(static_cast<std::uint64_t>(a.tag));
        std::uint64_t bits;
        static_assert(sizeof(double) == sizeof(std::uint64_t));
        std::memcpy(&bits, &a.slope, 8);
        mix(bits);
        std::memcpy(&bits, &a.alpha, 8);
        mix(bits);
    }
    for (const Matrix& w : m.weights) {
        for (double v : w.data()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            mix(bits);
        }
    }
    return h;
}

/// Everything the gradient formulas read back from one forward pass:
/// the propagation matrix, every layer's pre-activation Z_s = P H_{s-1} W_s
/// and activation H_s, the output, and (link task) the Gram matrix H_d H_d^T.
struct ForwardCache {
    Matrix p;                 // propagation matrix (A or Ahat)
    std::vector<Matrix> h;    // h[s] = H_s, s = 0..d
    std::vector<Matrix> z;    // z[s-1] = Z_s, s = 1..d
    Matrix gram;              // H_d H_d^T (link task only)
    Matrix yhat;
    std::uint64_t fingerprint = 0;
};

inline Matrix propagation_matrix(const GcnModel& m, const Graph& g) {
    if (m.task == Task::link || m.use_normalized_adjacency) return normalized_adjacency(g);
    return adjacency(g);
}

inline ForwardCache forward(const GcnModel& m, const Graph& g) {
    validate_model(m);
    if (g.features.cols() != m.dims[0]) {
        throw std::invalid_argument("forward: features have " +
                                    std::to_string(g.features.cols()) +
                                    " columns but the model expects n_0 = " +
                                    std::to_string(m.dims[0]));
    }
    const std::size_t d = m.depth();
    ForwardCache c;
    c.p = propagation_matrix(m, g);
    c.h.reserve(d + 1);
    c.h.push_back(g.features);
    c.z.reserve(d);
    for (std::size_t s = 0; s < d; ++s) {
        c.z.push_back(multiply(multiply(c.p, c.h[s]), m.weights[s]));
        c.h.push_back(apply(m.activations[s], c.z[s]));
    }
    if (m.task == Task::node) {
        c.yhat = apply(m.activations[d], c.h[d]);
    } else {
        c.gram = multiply(c.h[d], transpose(c.h[d]));
        c.yhat = apply(m.activations[d], c.gram);
    }
    c.fingerprint = model_fingerprint(m);
    return c;
}

// --- Losses -----------------------------------------------------------

constexpr double kProbClamp = 1e-12;

/// Clamp a probability into [eps, 1-eps]; NaN passes through so degenerate
/// forward passes stay detectable.
inline double clamp_prob(double v) {
    if (std::isnan(v)) return v;
    if (v < kProbClamp) return kProbClamp;
    if (v > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return v;
}

/// (y - yhat) / (yhat (1 - yhat)), the residual coefficient shared by the
/// node loss gradient and the reverse-mode tape. `yhat` must already be
/// clamped so the two gradient paths divide by identical values.
inline double residual_coefficient(double y, double clamped_yhat) {
    return (y - clamped_yhat) / (clamped_yhat * (1.0 - clamped_yhat));
}

/// A loss evaluation: the clamped value plus the paper's NaN signal, raised
/// when the unclamped computation would not be finite (saturated prediction
/// against a mismatched label, or a NaN forward pass).
struct LossValue {
    double value = 0.0;
    bool nan_unclamped = false;
};

/// Binary cross-entropy over all entries:
///   L = -sum_ij ( y_ij ln(yhat_ij) + (1 - y_ij) ln(1 - yhat_ij) ).
inline LossValue node_loss(const Matrix& y, const Matrix& yhat) {
    require_same_shape(y, yhat, "node_loss");
    LossValue out;
    double sum = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double label = y.at_flat(k);
        const double raw = yhat.at_flat(k);
        const double c = clamp_prob(raw);
        const double raw_term = label > 0.5 ? std::log(raw) : std::log(1.0 - raw);
        if (!std::isfinite(raw_term)) out.nan_unclamped = true;
        sum += label * std::log(c) + (1.0 - label) * std::log(1.0 - c);
    }
    out.value = -sum;
    if (std::isnan(out.value)) out.nan_unclamped = true;
    return out;
}

/// Link-prediction loss over the listed pairs, each counted once:
///   L = -sum_{(i,j) in E} ln(yhat_ij) - sum_{(i,j) in S} ln(1 - yhat_ij).
inline LossValue link_loss(const Matrix& yhat, const std::vector<Edge>& edges,
                           const std::vector<Edge>& negatives) {
    LossValue out;
    double sum = 0.0;
    auto entry = [&yhat](const Edge& e) {
        if (e.first >= yhat.rows() || e.second >= yhat.cols()) {
            throw std::out_of_range("link_loss: pair (" + std::to_string(e.first) + "," +
                                    std::to_string(e.second) + ") out of range");
        }
        return yhat(e.first, e.second);
    };
    for (const Edge& e : edges) {
        const double raw = entry(e);
        if (!std::isfinite(std::log(raw))) out.nan_unclamped = true;
        sum -= std::log(clamp_prob(raw));
    }
    for (const Edge& e : negatives) {
        const double raw = entry(e);
        if (!std::isfinite(std::log(1.0 - raw))) out.nan_unclamped = true;
        sum -= std::log(1.0 - clamp_prob(raw));
    }
    out.value = sum;
    if (std::isnan(out.value)) out.nan_unclamped = true;
    return out;
}

}  // namespace gcngrad

#endif  // GCNGRAD_GCN_HPP
