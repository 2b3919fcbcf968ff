#ifndef GCNGRAD_MATGRAD_HPP
#define GCNGRAD_MATGRAD_HPP

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gcngrad/activations.hpp"
#include "gcngrad/gcn.hpp"
#include "gcngrad/graph.hpp"
#include "gcngrad/kronecker.hpp"
#include "gcngrad/matrix.hpp"

// Closed-form gradients of the GCN losses with respect to each weight
// matrix, and sensitivities with respect to the input features, assembled
// exactly as the matrix-calculus derivation writes them: Kronecker factors,
// all-ones matrices, and the permutation / related matrices U and Ubar are
// materialized densely rather than algebraically simplified. The reverse-mode
// tape in oracle.hpp is the fast route; this module is the derivation made
// executable.

namespace gcngrad {

namespace detail {

inline void check_cache(const GcnModel& m, const ForwardCache& c, const char* who) {
    if (c.fingerprint != model_fingerprint(m)) {
        throw std::invalid_argument(std::string(who) +
                                    ": forward cache is stale for this model/weights");
    }
}

inline void check_layer(const GcnModel& m, std::size_t layer, const char* who) {
    if (layer >= m.depth()) {
        throw std::out_of_range(std::string(who) + ": layer " + std::to_string(layer) +
                                " out of range for depth " + std::to_string(m.depth()));
    }
}

}  // namespace detail

/// dH_r / dW_s for the layer recursion H_r = Sigma_r(P H_{r-1} W_r),
/// as a block derivative with outer shape n_{s-1} x n_s and inner shape
/// n x n_r. `transposed` selects dH_r^T / dW_s instead (inner n_r x n).
/// Layer indices are 0-based: layer = s-1, upto = r-1, and upto >= layer.
///
/// Base case (r = s):
///   dH_s/dW_s   = (J kron Sigma_s'(Z_s)) had ((I kron (P H_{s-1})) Ubar)
///   dH_s^T/dW_s = (J kron Sigma_s'(Z_s)^T) had (U (I kron (P H_{s-1})^T))
/// Recursive case (r > s):
///   dH_r/dW_s   = (J kron Sigma_r'(Z_r)) had ((I kron P) dH_{r-1}/dW_s (I kron W_r))
///   dH_r^T/dW_s = (J kron Sigma_r'(Z_r)^T) had ((I kron W_r^T) dH_{r-1}^T/dW_s (I kron P^T))
inline BlockDerivative layer_jacobian(const GcnModel& m, const ForwardCache& c,
                                      std::size_t upto, std::size_t layer,
                                      bool transposed = false) {
    detail::check_cache(m, c, "layer_jacobian");
    detail::check_layer(m, layer, "layer_jacobian");
    if (upto >= m.depth() || upto < layer) {
        throw std::out_of_range("layer_jacobian: need layer <= upto < depth, got upto=" +
                                std::to_string(upto) + " layer=" + std::to_string(layer));
    }
    const std::size_t p = m.dims[layer];      // n_{s-1}
    const std::size_t q = m.dims[layer + 1];  // n_s
    const std::size_t n = c.p.rows();
    const Matrix outer_ones = Matrix::ones(p, q);
    const Matrix eye_p = Matrix::identity(p);
    const Matrix eye_q = Matrix::identity(q);

    // Base: derivative of H_s itself.
    const Matrix ph = multiply(c.p, c.h[layer]);  // P H_{s-1}, n x n_{s-1}
    Matrix payload;
    if (!transposed) {
        payload = hadamard(kron(outer_ones, apply_deriv(m.activations[layer], c.z[layer])),
                           multiply(kron(eye_p, ph), related_ubar(p, q)));
    } else {
        payload = hadamard(
            kron(outer_ones, transpose(apply_deriv(m.activations[layer], c.z[layer]))),
            multiply(permutation_u(p, q), kron(eye_q, transpose(ph))));
    }

    if (!transposed) {
        const Matrix eye_p_kron_p = kron(eye_p, c.p);  // shared by every level
        for (std::size_t r = layer + 1; r <= upto; ++r) {
            payload = hadamard(
                kron(outer_ones, apply_deriv(m.activations[r], c.z[r])),
                multiply(multiply(eye_p_kron_p, payload), kron(eye_q, m.weights[r])));
        }
        return BlockDerivative(p, q, n, m.dims[upto + 1], std::move(payload));
    }
    const Matrix eye_q_kron_pt = kron(eye_q, transpose(c.p));
    for (std::size_t r = layer + 1; r <= upto; ++r) {
        payload = hadamard(
            kron(outer_ones, transpose(apply_deriv(m.activations[r], c.z[r]))),
            multiply(multiply(kron(eye_p, transpose(m.weights[r])), payload), eye_q_kron_pt));
    }
    return BlockDerivative(p, q, m.dims[upto + 1], n, std::move(payload));
}

/// dL/dW_s for binary node classification:
///
///   dL/dW_s = -sum_i sum_j  (y_ij - yhat_ij)/(yhat_ij (1-yhat_ij))
///             * Sigma_{d+1}'(h_{d,ij})
///             * ( (J kron Sigma_d'(A_i* H_{d-1} W_{d,*j})) had
///                 d(A_i* H_{d-1} W_{d,*j})/dW_s )
///
/// with the s = d branch going through Ubar and e_j and the s < d branch
/// through the layer recursion. `layer` is 0-based (paper's s - 1).
inline Matrix node_weight_grad(const GcnModel& m, const ForwardCache& c, const Matrix& labels,
                               std::size_t layer) {
    detail::check_cache(m, c, "node_weight_grad");
    detail::check_layer(m, layer, "node_weight_grad");
    if (m.task != Task::node) throw std::invalid_argument("node_weight_grad: model task is link");
    const std::size_t d = m.depth();
    const std::size_t n = c.p.rows();
    const std::size_t nd = m.dims[d];
    require_same_shape(labels, c.yhat, "node_weight_grad labels");
    const std::size_t p = m.dims[layer], q = m.dims[layer + 1];
    const Matrix outer_ones = Matrix::ones(p, q);
    const bool last = layer + 1 == d;

    // Factors independent of (i, j).
    Matrix ph;                             // P H_{d-1} (s = d branch)
    std::vector<Matrix> right_by_j(nd);    // per-column right factors
    if (last) {
        ph = multiply(c.p, c.h[d - 1]);
        const Matrix ubar = related_ubar(p, q);
        for (std::size_t j = 0; j < nd; ++j) {
            right_by_j[j] = multiply(ubar, kron(Matrix::identity(nd), unit_vector(nd, j)));
        }
    } else {
        const BlockDerivative dh = layer_jacobian(m, c, d - 2, layer);
        for (std::size_t j = 0; j < nd; ++j) {
            right_by_j[j] =
                multiply(dh.payload, kron(Matrix::identity(q), m.weights[d - 1].col(j)));
        }
    }

    Matrix acc(p, q);
    const Matrix& pre_out = c.h[d];  // h_{d,ij} feeds Sigma_{d+1}'
    for (std::size_t i = 0; i < n; ++i) {
        Matrix left = last ? kron(Matrix::identity(p), ph.row(i))
                           : kron(Matrix::identity(p), c.p.row(i));
        for (std::size_t j = 0; j < nd; ++j) {
            const double coeff =
                residual_coefficient(labels(i, j), clamp_prob(c.yhat(i, j))) *
                activation_derivative(m.activations[d], pre_out(i, j));
            if (coeff == 0.0) continue;  // zero residual contributes nothing
            const Matrix inner =
                hadamard(kron(outer_ones,
                              Matrix{{activation_derivative(m.activations[d - 1], c.z[d - 1](i, j))}}),
                         multiply(left, right_by_j[j]));
            acc = acc + coeff * inner;
        }
    }
    return -1.0 * acc;
}

/// dL/dW_s for link prediction:
///
///   dL/dW_s = -sum_{(i,j) in E} (1/yhat_ij) dyhat_ij/dW_s
///             +sum_{(i,j) in S} (1/(1-yhat_ij)) dyhat_ij/dW_s
///
/// where dyhat_ij/dW_s is the two-branch product-rule expression through
/// H_d H_d^T, with Ubar on the plain branch and U on the transposed branch.
inline Matrix link_weight_grad(const GcnModel& m, const ForwardCache& c,
                               const std::vector<Edge>& edges,
                               const std::vector<Edge>& negatives, std::size_t layer) {
    detail::check_cache(m, c, "link_weight_grad");
    detail::check_layer(m, layer, "link_weight_grad");
    if (m.task != Task::link) throw std::invalid_argument("link_weight_grad: model task is node");
    {
        std::set<Edge> e(edges.begin(), edges.end());
        for (const Edge& s : negatives) {
            if (e.count(s)) {
                throw std::invalid_argument("link_weight_grad: negative pair (" +
                                            std::to_string(s.first) + "," +
                                            std::to_string(s.second) + ") is an edge");
            }
        }
    }
    const std::size_t d = m.depth();
    const std::size_t p = m.dims[layer], q = m.dims[layer + 1];
    const Matrix outer_ones = Matrix::ones(p, q);
    const Matrix eye_p = Matrix::identity(p);
    const Matrix eye_q = Matrix::identity(q);
    const bool last = layer + 1 == d;
    const Matrix& hd = c.h[d];
    const Matrix& zd = c.z[d - 1];

    // Pair-independent factors.
    Matrix ph, u, right_plain, left_trans;
    if (last) {
        ph = multiply(c.p, c.h[d - 1]);
        u = permutation_u(p, q);
    } else {
        const BlockDerivative dh = layer_jacobian(m, c, d - 2, layer, false);
        const BlockDerivative dht = layer_jacobian(m, c, d - 2, layer, true);
        right_plain = multiply(dh.payload, kron(eye_q, m.weights[d - 1]));
        left_trans = multiply(kron(eye_p, transpose(m.weights[d - 1])), dht.payload);
    }

    // d(Ahat_i* H_{d-1} W_d)/dW_s, cached per node.
    std::map<std::size_t, Matrix> plain_by_node;
    auto plain_branch = [&](std::size_t node) -> const Matrix& {
        auto it = plain_by_node.find(node);
        if (it != plain_by_node.end()) return it->second;
        Matrix v = last ? multiply(kron(eye_p, ph.row(node)), related_ubar(p, q))
                        : multiply(kron(eye_p, c.p.row(node)), right_plain);
        return plain_by_node.emplace(node, std::move(v)).first->second;
    };
    // d(Ahat_j* H_{d-1} W_d)^T/dW_s, cached per node.
    std::map<std::size_t, Matrix> trans_by_node;
    auto trans_branch = [&](std::size_t node) -> const Matrix& {
        auto it = trans_by_node.find(node);
        if (it != trans_by_node.end()) return it->second;
        Matrix v = last ? multiply(u, kron(eye_q, transpose(ph.row(node))))
                        : multiply(left_trans, kron(eye_q, transpose(c.p.row(node))));
        return trans_by_node.emplace(node, std::move(v)).first->second;
    };

    auto dyhat = [&](std::size_t i, std::size_t j) {
        const Matrix b1 =
            multiply(hadamard(kron(outer_ones, apply_deriv(m.activations[d - 1], zd.row(i))),
                              plain_branch(i)),
                     kron(eye_q, transpose(hd.row(j))));
        const Matrix b2 = multiply(
            kron(eye_p, hd.row(i)),
            hadamard(kron(outer_ones, transpose(apply_deriv(m.activations[d - 1], zd.row(j)))),
                     trans_branch(j)));
        return activation_derivative(m.activations[d], c.gram(i, j)) * (b1 + b2);
    };

    Matrix acc(p, q);
    for (const Edge& e : edges) {
        const double coeff = -1.0 / clamp_prob(c.yhat(e.first, e.second));
        acc = acc + coeff * dyhat(e.first, e.second);
    }
    for (const Edge& s : negatives) {
        const double coeff = 1.0 / (1.0 - clamp_prob(c.yhat(s.first, s.second)));
        acc = acc + coeff * dyhat(s.first, s.second);
    }
    return acc;
}

/// Sensitivity subject: the loss (node task) or one output entry (link task).
struct SensitivityMap {
    std::string subject;
    Matrix value;  // n x n_0, the shape of H_0
};

/// dH_r / dH_0 (plain or transposed), outer shape n x n_0. 0-based `upto`.
inline BlockDerivative input_jacobian(const GcnModel& m, const ForwardCache& c,
                                      std::size_t upto, bool transposed = false) {
    detail::check_cache(m, c, "input_jacobian");
    if (upto >= m.depth()) throw std::out_of_range("input_jacobian: layer out of range");
    const std::size_t n = c.p.rows();
    const std::size_t n0 = m.dims[0];
    const Matrix outer_ones = Matrix::ones(n, n0);
    const Matrix eye_n = Matrix::identity(n);
    const Matrix eye_n0 = Matrix::identity(n0);

    Matrix payload;
    if (!transposed) {
        payload = hadamard(kron(outer_ones, apply_deriv(m.activations[0], c.z[0])),
                           multiply(kron(eye_n, c.p),
                                    multiply(related_ubar(n, n0), kron(eye_n0, m.weights[0]))));
    } else {
        payload = hadamard(kron(outer_ones, transpose(apply_deriv(m.activations[0], c.z[0]))),
                           multiply(multiply(kron(eye_n, transpose(m.weights[0])),
                                             permutation_u(n, n0)),
                                    kron(eye_n0, transpose(c.p))));
    }
    for (std::size_t r = 1; r <= upto; ++r) {
        if (!transposed) {
            payload = hadamard(kron(outer_ones, apply_deriv(m.activations[r], c.z[r])),
                               multiply(multiply(kron(eye_n, c.p), payload),
                                        kron(eye_n0, m.weights[r])));
        } else {
            payload = hadamard(
                kron(outer_ones, transpose(apply_deriv(m.activations[r], c.z[r]))),
                multiply(multiply(kron(eye_n, transpose(m.weights[r])), payload),
                         kron(eye_n0, transpose(c.p))));
        }
    }
    if (!transposed) return BlockDerivative(n, n0, n, m.dims[upto + 1], std::move(payload));
    return BlockDerivative(n, n0, m.dims[upto + 1], n, std::move(payload));
}

/// dL/dH_0 for the node task: the weight-gradient expression with the
/// identity / all-ones / related-matrix dimensions swapped to n x n_0 and
/// the last-layer branch differentiating through H_0 instead of W_d.
inline SensitivityMap node_input_sensitivity(const GcnModel& m, const ForwardCache& c,
                                             const Matrix& labels) {
    detail::check_cache(m, c, "node_input_sensitivity");
    if (m.task != Task::node) {
        throw std::invalid_argument("node_input_sensitivity: model task is link");
    }
    const std::size_t d = m.depth();
    const std::size_t n = c.p.rows();
    const std::size_t n0 = m.dims[0];
    const std::size_t nd = m.dims[d];
    require_same_shape(labels, c.yhat, "node_input_sensitivity labels");
    const Matrix outer_ones = Matrix::ones(n, n0);
    const Matrix eye_n = Matrix::identity(n);
    const Matrix eye_n0 = Matrix::identity(n0);

    std::vector<Matrix> right_by_j(nd);
    if (d == 1) {
        const Matrix ubar = related_ubar(n, n0);
        for (std::size_t j = 0; j < nd; ++j) {
            right_by_j[j] = multiply(ubar, kron(eye_n0, m.weights[d - 1].col(j)));
        }
    } else {
        const BlockDerivative dh = input_jacobian(m, c, d - 2);
        for (std::size_t j = 0; j < nd; ++j) {
            right_by_j[j] = multiply(dh.payload, kron(eye_n0, m.weights[d - 1].col(j)));
        }
    }

    Matrix acc(n, n0);
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix left = kron(eye_n, c.p.row(i));
        for (std::size_t j = 0; j < nd; ++j) {
            const double coeff =
                residual_coefficient(labels(i, j), clamp_prob(c.yhat(i, j))) *
                activation_derivative(m.activations[d], c.h[d](i, j));
            if (coeff == 0.0) continue;
            const Matrix inner = hadamard(
                kron(outer_ones,
                     Matrix{{activation_derivative(m.activations[d - 1], c.z[d - 1](i, j))}}),
                multiply(left, right_by_j[j]));
            acc = acc + coeff * inner;
        }
    }
    SensitivityMap s;
    s.subject = "loss";
    s.value = -1.0 * acc;
    return s;
}

/// dyhat_ij / dH_0 for the link task. The pair is unordered (Yhat is
/// symmetric), so (i,j) and (j,i) produce the identical map.
inline SensitivityMap link_output_sensitivity(const GcnModel& m, const ForwardCache& c,
                                              std::size_t i, std::size_t j) {
    detail::check_cache(m, c, "link_output_sensitivity");
    if (m.task != Task::link) {
        throw std::invalid_argument("link_output_sensitivity: model task is node");
    }
    const std::size_t n = c.p.rows();
    if (i >= n || j >= n) {
        throw std::out_of_range("link_output_sensitivity: pair (" + std::to_string(i) + "," +
                                std::to_string(j) + ") out of range");
    }
    if (i > j) std::swap(i, j);
    const std::size_t d = m.depth();
    const std::size_t n0 = m.dims[0];
    const Matrix outer_ones = Matrix::ones(n, n0);
    const Matrix eye_n = Matrix::identity(n);
    const Matrix eye_n0 = Matrix::identity(n0);
    const Matrix& hd = c.h[d];
    const Matrix& zd = c.z[d - 1];

    Matrix plain, trans;
    if (d == 1) {
        // The H_0-derivative base case: Ubar on the plain branch and U on the
        // transposed one, with the model weights as the constant factors.
        plain = multiply(multiply(kron(eye_n, c.p.row(i)), related_ubar(n, n0)),
                         kron(eye_n0, m.weights[0]));
        trans = multiply(multiply(kron(eye_n, transpose(m.weights[0])), permutation_u(n, n0)),
                         kron(eye_n0, transpose(c.p.row(j))));
    } else {
        const BlockDerivative dh = input_jacobian(m, c, d - 2, false);
        const BlockDerivative dht = input_jacobian(m, c, d - 2, true);
        plain = multiply(multiply(kron(eye_n, c.p.row(i)), dh.payload),
                         kron(eye_n0, m.weights[d - 1]));
        trans = multiply(multiply(kron(eye_n, transpose(m.weights[d - 1])), dht.payload),
                         kron(eye_n0, transpose(c.p.row(j))));
    }

    const Matrix b1 =
        multiply(hadamard(kron(outer_ones, apply_deriv(m.activations[d - 1], zd.row(i))), plain),
                 kron(eye_n0, transpose(hd.row(j))));
    const Matrix b2 = multiply(
        kron(eye_n, hd.row(i)),
        hadamard(kron(outer_ones, transpose(apply_deriv(m.activations[d - 1], zd.row(j)))),
                 trans));

    SensitivityMap s;
    s.subject = "output(" + std::to_string(i) + "," + std::to_string(j) + ")";
    s.value = activation_derivative(m.activations[d], c.gram(i, j)) * (b1 + b2);
    return s;
}

}  // namespace gcngrad

#endif  // GCNGRAD_MATGRAD_HPP
