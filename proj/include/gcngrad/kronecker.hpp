#ifndef GCNGRAD_KRONECKER_HPP
#define GCNGRAD_KRONECKER_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

#include "gcngrad/matrix.hpp"

namespace gcngrad {

/// Kronecker product: block (i,j) of the result is a(i,j) * b.
inline Matrix kron(const Matrix& a, const Matrix& b) {
    const std::size_t p = a.rows(), q = a.cols(), m = b.rows(), n = b.cols();
    Matrix c(p * m, q * n);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            const double aij = a.at_flat(i * q + j);
            for (std::size_t r = 0; r < m; ++r) {
                for (std::size_t s = 0; s < n; ++s) {
                    c.at_flat((i * m + r) * q * n + (j * n + s)) = aij * b.at_flat(r * n + s);
                }
            }
        }
    }
    return c;
}

/// Hadamard (entrywise) product of two same-shape matrices.
inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k) c.at_flat(k) = a.at_flat(k) * b.at_flat(k);
    return c;
}

/// Unit column vector e_j of dimension k (0-based j).
inline Matrix unit_vector(std::size_t k, std::size_t j) {
    if (j >= k) {
        throw std::out_of_range("unit_vector: j=" + std::to_string(j) +
                                " out of range for dimension " + std::to_string(k));
    }
    Matrix e(k, 1);
    e(j, 0) = 1.0;
    return e;
}

/// Elementary matrix E_ij of size p x q: e_i e_j^T (0-based i, j).
inline Matrix elementary(std::size_t p, std::size_t q, std::size_t i, std::size_t j) {
    if (i >= p || j >= q) {
        throw std::out_of_range("elementary: (" + std::to_string(i) + "," + std::to_string(j) +
                                ") out of range for " + std::to_string(p) + "x" +
                                std::to_string(q));
    }
    Matrix e(p, q);
    e(i, j) = 1.0;
    return e;
}

/// Permutation matrix U_{p x q} = sum_ij E_ij^{(p x q)} kron E_ji^{(q x p)}.
///
/// Square of order pq; the block-layout derivative of the transpose map.
inline Matrix permutation_u(std::size_t p, std::size_t q) {
    if (p == 0 || q == 0) throw std::invalid_argument("permutation_u: dimensions must be positive");
    Matrix u(p * q, p * q);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            // E_ij kron E_ji contributes a single 1 at row i*q+j, col j*p+i.
            u(i * q + j, j * p + i) = 1.0;
        }
    }
    return u;
}

/// Related matrix Ubar_{p x q} = sum_ij E_ij^{(p x q)} kron E_ij^{(p x q)}.
///
/// Rectangular p^2 x q^2; the block-layout derivative of the identity map.
inline Matrix related_ubar(std::size_t p, std::size_t q) {
    if (p == 0 || q == 0) throw std::invalid_argument("related_ubar: dimensions must be positive");
    Matrix u(p * p, q * q);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            // E_ij kron E_ij contributes a single 1 at row i*p+i, col j*q+j.
            u(i * p + i, j * q + j) = 1.0;
        }
    }
    return u;
}

/// Block-layout matrix derivative: dF/dX of an m x n matrix function with
/// respect to a p x q variable is stored as one (p*m) x (q*n) payload whose
/// (i,j) block is dF/dx_ij. With m = n = 1 the payload has the shape of the
/// variable itself, which is what lets scalar-loss gradients drive SGD
/// directly.
struct BlockDerivative {
    std::size_t outer_rows = 0;  // p
    std::size_t outer_cols = 0;  // q
    std::size_t inner_rows = 0;  // m
    std::size_t inner_cols = 0;  // n
    Matrix payload;

    BlockDerivative() = default;

    BlockDerivative(std::size_t p, std::size_t q, std::size_t m, std::size_t n)
        : outer_rows(p), outer_cols(q), inner_rows(m), inner_cols(n),
          payload(p * m, q * n) {}

    BlockDerivative(std::size_t p, std::size_t q, std::size_t m, std::size_t n, Matrix pl)
        : outer_rows(p), outer_cols(q), inner_rows(m), inner_cols(n), payload(std::move(pl)) {
        if (payload.rows() != p * m || payload.cols() != q * n) {
            throw std::invalid_argument("BlockDerivative: payload is " +
                                        std::to_string(payload.rows()) + "x" +
                                        std::to_string(payload.cols()) + ", expected " +
                                        std::to_string(p * m) + "x" + std::to_string(q * n));
        }
    }

    /// The (i,j) block dF/dx_ij (0-based outer indices).
    Matrix block(std::size_t i, std::size_t j) const {
        if (i >= outer_rows || j >= outer_cols) {
            throw std::out_of_range("BlockDerivative::block: (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") out of range for " +
                                    std::to_string(outer_rows) + "x" +
                                    std::to_string(outer_cols) + " blocks");
        }
        Matrix b(inner_rows, inner_cols);
        for (std::size_t r = 0; r < inner_rows; ++r) {
            for (std::size_t c = 0; c < inner_cols; ++c) {
                b(r, c) = payload(i * inner_rows + r, j * inner_cols + c);
            }
        }
        return b;
    }

    void set_block(std::size_t i, std::size_t j, const Matrix& b) {
        if (i >= outer_rows || j >= outer_cols) {
            throw std::out_of_range("BlockDerivative::set_block: index out of range");
        }
        if (b.rows() != inner_rows || b.cols() != inner_cols) {
            throw std::invalid_argument("BlockDerivative::set_block: block shape mismatch");
        }
        for (std::size_t r = 0; r < inner_rows; ++r) {
            for (std::size_t c = 0; c < inner_cols; ++c) {
                payload(i * inner_rows + r, j * inner_cols + c) = b(r, c);
            }
        }
    }
};

}  // namespace gcngrad

#endif  // GCNGRAD_KRONECKER_HPP
