#ifndef GCNGRAD_ORACLE_HPP
#define GCNGRAD_ORACLE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcngrad/activations.hpp"
#include "gcngrad/gcn.hpp"
#include "gcngrad/graph.hpp"
#include "gcngrad/kronecker.hpp"
#include "gcngrad/matrix.hpp"

// Two independent gradient references for validating the closed-form
// expressions: central finite differences and a minimal reverse-mode tape,
// plus the SSE comparator used throughout the experiments.

namespace gcngrad {

/// Sum of squared entrywise differences.
inline double sse(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sse");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a.at_flat(k) - b.at_flat(k);
        s += d * d;
    }
    return s;
}

/// ||a - b||_F / max(||a||_F, ||b||_F); zero when both are zero.
inline double rel_frobenius_error(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "rel_frobenius_error");
    const double denom = std::max(frobenius_norm(a), frobenius_norm(b));
    if (denom == 0.0) return 0.0;
    return frobenius_norm(a - b) / denom;
}

/// Central finite differences of a scalar function of one matrix variable:
/// entry (i,j) is (f(x + h E_ij) - f(x - h E_ij)) / (2h). Non-finite
/// evaluations flag the entry as NaN.
inline Matrix fd_grad(const std::function<double(const Matrix&)>& fn, const Matrix& at,
                      double h = 1e-6) {
    if (!(h > 0.0)) throw std::invalid_argument("fd_grad: h must be positive");
    Matrix g(at.rows(), at.cols());
    Matrix x = at;
    for (std::size_t i = 0; i < at.rows(); ++i) {
        for (std::size_t j = 0; j < at.cols(); ++j) {
            const double orig = x(i, j);
            x(i, j) = orig + h;
            const double fp = fn(x);
            x(i, j) = orig - h;
            const double fm = fn(x);
            x(i, j) = orig;
            const double d = (fp - fm) / (2.0 * h);
            g(i, j) = std::isfinite(d) ? d : std::nan("");
        }
    }
    return g;
}

/// Central finite differences of a matrix-valued function, laid out as a
/// block derivative: block (i,j) is dF/dx_ij.
inline BlockDerivative fd_block_derivative(const std::function<Matrix(const Matrix&)>& fn,
                                           const Matrix& at, double h = 1e-6) {
    if (!(h > 0.0)) throw std::invalid_argument("fd_block_derivative: h must be positive");
    Matrix x = at;
    const Matrix probe = fn(x);
    BlockDerivative d(at.rows(), at.cols(), probe.rows(), probe.cols());
    for (std::size_t i = 0; i < at.rows(); ++i) {
        for (std::size_t j = 0; j < at.cols(); ++j) {
            const double orig = x(i, j);
            x(i, j) = orig + h;
            const Matrix fp = fn(x);
            x(i, j) = orig - h;
            const Matrix fm = fn(x);
            x(i, j) = orig;
            d.set_block(i, j, (1.0 / (2.0 * h)) * (fp - fm));
        }
    }
    return d;
}

// --- Reverse-mode tape --------------------------------------------------

/// Arithmetic width of a tape evaluation. f32 reproduces the behaviour of a
/// single-precision AD framework: every primitive computes with float
/// operands and float accumulation, and results are stored rounded to
/// float. The closed-form path always runs in float64, so comparing it
/// against an f32 tape measures exactly the precision gap the SSE
/// experiments report.
enum class TapePrecision { f64, f32 };

/// Minimal reverse-mode tape over the six op kinds the GCN losses need.
/// Nodes are appended in topological order (inputs before users); backward
/// walks the list once in reverse.
class Tape {
public:
    explicit Tape(TapePrecision precision = TapePrecision::f64) : precision_(precision) {}

    int input(Matrix value) { return push(Op::input, -1, -1, quantize(std::move(value))); }

    int matmul(int a, int b) {
        return push(Op::matmul, a, b, mul(nodes_[check(a)].value, nodes_[check(b)].value));
    }

    int activation(ActivationKind kind, int a) {
        int id = push(Op::activation, a, -1, quantize(apply(kind, nodes_[check(a)].value)));
        nodes_[id].kind = kind;
        return id;
    }

    int transpose_of(int a) {
        return push(Op::transpose, a, -1, quantize(transpose(nodes_[check(a)].value)));
    }

    /// Gram product X X^T.
    int gram(int a) {
        const Matrix& x = nodes_[check(a)].value;
        return push(Op::gram, a, -1, mul(x, transpose(x)));
    }

    /// Gather the listed entries of a matrix into a column vector.
    int gather_entries(int a, std::vector<Edge> pairs) {
        const Matrix& x = nodes_[check(a)].value;
        Matrix v(pairs.size(), 1);
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (pairs[k].first >= x.rows() || pairs[k].second >= x.cols()) {
                throw std::out_of_range("Tape::gather_entries: pair out of range");
            }
            v(k, 0) = x(pairs[k].first, pairs[k].second);
        }
        int id = push(Op::gather, a, -1, quantize(std::move(v)));
        nodes_[id].pairs = std::move(pairs);
        return id;
    }

    /// Binary cross-entropy against fixed labels, with the same clamped-log
    /// convention as the gcn losses.
    int bce_loss(int a, Matrix labels) {
        const Matrix& x = nodes_[check(a)].value;
        require_same_shape(x, labels, "Tape::bce_loss");
        double sum = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double c = clamp_prob(x.at_flat(k));
            sum += labels.at_flat(k) * std::log(c) +
                   (1.0 - labels.at_flat(k)) * std::log(1.0 - c);
        }
        int id = push(Op::bce, a, -1, quantize(Matrix{{-sum}}));
        nodes_[id].labels = std::move(labels);
        return id;
    }

    const Matrix& value(int id) const { return nodes_[check(id)].value; }

    /// Reverse accumulation from a scalar root.
    void backward(int root) {
        check(root);
        if (nodes_[root].value.size() != 1) {
            throw std::invalid_argument("Tape::backward: root must be scalar");
        }
        for (auto& n : nodes_) n.adjoint = Matrix::zeros(n.value.rows(), n.value.cols());
        nodes_[root].adjoint = Matrix{{1.0}};
        for (int id = root; id >= 0; --id) {
            const Node& n = nodes_[id];
            const Matrix& g = n.adjoint;
            switch (n.op) {
                case Op::input:
                    break;
                case Op::matmul:
                    accumulate(n.a, mul(g, transpose(nodes_[n.b].value)));
                    accumulate(n.b, mul(transpose(nodes_[n.a].value), g));
                    break;
                case Op::activation:
                    accumulate(n.a, quantize(hadamard(g, apply_deriv(n.kind, nodes_[n.a].value))));
                    break;
                case Op::transpose:
                    accumulate(n.a, transpose(g));
                    break;
                case Op::gram:
                    accumulate(n.a, mul(g + transpose(g), nodes_[n.a].value));
                    break;
                case Op::gather: {
                    Matrix scat(nodes_[n.a].value.rows(), nodes_[n.a].value.cols());
                    for (std::size_t k = 0; k < n.pairs.size(); ++k) {
                        scat(n.pairs[k].first, n.pairs[k].second) += g(k, 0);
                    }
                    accumulate(n.a, quantize(std::move(scat)));
                    break;
                }
                case Op::bce: {
                    const Matrix& x = nodes_[n.a].value;
                    Matrix gx(x.rows(), x.cols());
                    for (std::size_t k = 0; k < x.size(); ++k) {
                        gx.at_flat(k) = -g(0, 0) * residual_coefficient(n.labels.at_flat(k),
                                                                        clamp_prob(x.at_flat(k)));
                    }
                    accumulate(n.a, quantize(std::move(gx)));
                    break;
                }
            }
        }
    }

    const Matrix& adjoint(int id) const { return nodes_[check(id)].adjoint; }

    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op { input, matmul, activation, transpose, gram, gather, bce };

    struct Node {
        Op op;
        int a, b;
        Matrix value;
        Matrix adjoint;
        ActivationKind kind{};
        std::vector<Edge> pairs;
        Matrix labels;
    };

    int check(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
            throw std::out_of_range("Tape: node id " + std::to_string(id) + " out of range");
        }
        return id;
    }

    int push(Op op, int a, int b, Matrix value) {
        nodes_.push_back(Node{op, a, b, std::move(value), {}, {}, {}, {}});
        return static_cast<int>(nodes_.size()) - 1;
    }

    Matrix quantize(Matrix m) const {
        if (precision_ == TapePrecision::f32) {
            for (std::size_t k = 0; k < m.size(); ++k) {
                m.at_flat(k) = static_cast<double>(static_cast<float>(m.at_flat(k)));
            }
        }
        return m;
    }

    /// In f64 mode this is the shared matcore kernel (bitwise identical to
    /// the forward pass); in f32 mode operands and accumulator are floats.
    Matrix mul(const Matrix& a, const Matrix& b) const {
        if (precision_ == TapePrecision::f64) return multiply(a, b);
        if (a.cols() != b.rows()) throw std::invalid_argument("Tape::mul: dimension mismatch");
        const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
        Matrix c(m, n);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                float sum = 0.0f;
                for (std::size_t t = 0; t < k; ++t) {
                    sum += static_cast<float>(a.at_flat(i * k + t)) *
                           static_cast<float>(b.at_flat(t * n + j));
                }
                c.at_flat(i * n + j) = static_cast<double>(sum);
            }
        }
        return c;
    }

    void accumulate(int id, Matrix g) {
        Node& n = nodes_[check(id)];
        if (n.adjoint.empty()) {
            n.adjoint = std::move(g);
        } else {
            n.adjoint = quantize(n.adjoint + g);
        }
    }

    TapePrecision precision_;
    std::vector<Node> nodes_;
};

/// Per-weight-matrix tape gradients plus the forward loss, so callers can
/// reuse the pass for both numbers.
struct TapeGradients {
    std::vector<Matrix> grads;
    double loss = 0.0;
    bool nan_flagged = false;
};

/// Reverse-mode gradient of the node loss with respect to every W_s.
inline TapeGradients tape_node_grad(const GcnModel& m, const Graph& g,
                                    TapePrecision precision = TapePrecision::f64) {
    validate_model(m);
    if (m.task != Task::node) throw std::invalid_argument("tape_node_grad: model task is link");
    if (!g.labels) throw std::invalid_argument("tape_node_grad: graph has no labels");
    Tape tape(precision);
    const int p = tape.input(propagation_matrix(m, g));
    int h = tape.input(g.features);
    std::vector<int> ws;
    for (const Matrix& w : m.weights) ws.push_back(tape.input(w));
    for (std::size_t s = 0; s < m.depth(); ++s) {
        h = tape.activation(m.activations[s], tape.matmul(tape.matmul(p, h), ws[s]));
    }
    const int yhat = tape.activation(m.activations[m.depth()], h);
    const int loss = tape.bce_loss(yhat, *g.labels);
    TapeGradients out;
    out.loss = tape.value(loss)(0, 0);
    out.nan_flagged = !tape.value(yhat).all_finite() || !std::isfinite(out.loss);
    tape.backward(loss);
    for (std::size_t s = 0; s < m.depth(); ++s) out.grads.push_back(tape.adjoint(ws[s]));
    return out;
}

/// Reverse-mode gradient of the link loss (edges E, replayed negatives S).
inline TapeGradients tape_link_grad(const GcnModel& m, const Graph& g,
                                    const std::vector<Edge>& edges,
                                    const std::vector<Edge>& negatives,
                                    TapePrecision precision = TapePrecision::f64) {
    validate_model(m);
    if (m.task != Task::link) throw std::invalid_argument("tape_link_grad: model task is node");
    Tape tape(precision);
    const int p = tape.input(propagation_matrix(m, g));
    int h = tape.input(g.features);
    std::vector<int> ws;
    for (const Matrix& w : m.weights) ws.push_back(tape.input(w));
    for (std::size_t s = 0; s < m.depth(); ++s) {
        h = tape.activation(m.activations[s], tape.matmul(tape.matmul(p, h), ws[s]));
    }
    const int yhat = tape.activation(m.activations[m.depth()], tape.gram(h));
    std::vector<Edge> pairs = edges;
    pairs.insert(pairs.end(), negatives.begin(), negatives.end());
    Matrix labels(pairs.size(), 1);
    for (std::size_t k = 0; k < edges.size(); ++k) labels(k, 0) = 1.0;
    const int gathered = tape.gather_entries(yhat, std::move(pairs));
    const int loss = tape.bce_loss(gathered, std::move(labels));
    TapeGradients out;
    out.loss = tape.value(loss)(0, 0);
    out.nan_flagged = !tape.value(yhat).all_finite() || !std::isfinite(out.loss);
    tape.backward(loss);
    for (std::size_t s = 0; s < m.depth(); ++s) out.grads.push_back(tape.adjoint(ws[s]));
    return out;
}

/// Dispatch on task; negatives ignored for node models.
inline TapeGradients tape_grad(const GcnModel& m, const Graph& g,
                               const std::vector<Edge>& negatives = {},
                               TapePrecision precision = TapePrecision::f64) {
    if (m.task == Task::node) return tape_node_grad(m, g, precision);
    return tape_link_grad(m, g, g.edges, negatives, precision);
}

}  // namespace gcngrad

#endif  // GCNGRAD_ORACLE_HPP
