#include "gcngrad/kronecker.hpp"

#include <gtest/gtest.h>

#include "gcngrad/oracle.hpp"
#include "test_util.hpp"

using gcngrad::BlockDerivative;
using gcngrad::elementary;
using gcngrad::hadamard;
using gcngrad::kron;
using gcngrad::Matrix;
using gcngrad::permutation_u;
using gcngrad::related_ubar;
using gcngrad::unit_vector;

TEST(Kron, IdentityAndOnesScalarCases) {
    Matrix b{{1, 2}, {3, 4}};
    EXPECT_TRUE(gcngrad::exactly_equal(kron(Matrix::identity(1), b), b));
    EXPECT_TRUE(gcngrad::exactly_equal(kron(Matrix::ones(1, 1), b), b));
}

TEST(Kron, MatchesFourIndexDefinition) {
    // Frozen from the four-index oracle for [[1,2],[3,4]] kron [[0,1],[1,0]].
    Matrix a{{1, 2}, {3, 4}};
    Matrix b{{0, 1}, {1, 0}};
    Matrix expected{{0, 1, 0, 2}, {1, 0, 2, 0}, {0, 3, 0, 4}, {3, 0, 4, 0}};
    EXPECT_TRUE(gcngrad::exactly_equal(kron(a, b), expected));
    EXPECT_TRUE(gcngrad::exactly_equal(kron(a, b), testutil::kron_oracle(a, b)));

    gcngrad::Rng rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix x = testutil::random_matrix(1 + rep % 3, 2 + rep % 2, rng);
        const Matrix y = testutil::random_matrix(2 + rep % 2, 1 + rep % 4, rng);
        EXPECT_TRUE(gcngrad::exactly_equal(kron(x, y), testutil::kron_oracle(x, y)));
    }
}

TEST(Kron, MixedProductIdentity) {
    // (A kron B)(C kron D) = (AC) kron (BD) for all conforming shapes <= 3.
    gcngrad::Rng rng(22);
    for (std::size_t p = 1; p <= 3; ++p)
        for (std::size_t q = 1; q <= 3; ++q)
            for (std::size_t m = 1; m <= 3; ++m)
                for (std::size_t n = 1; n <= 3; ++n) {
                    const Matrix a = testutil::random_matrix(p, q, rng);
                    const Matrix c = testutil::random_matrix(q, m, rng);
                    const Matrix b = testutil::random_matrix(m, n, rng);
                    const Matrix d = testutil::random_matrix(n, p, rng);
                    const Matrix lhs = kron(a, b) * kron(c, d);
                    const Matrix rhs = kron(a * c, b * d);
                    EXPECT_LT(gcngrad::max_abs_diff(lhs, rhs), 1e-12);
                }
}

TEST(Hadamard, OnesAndZerosCases) {
    gcngrad::Rng rng(23);
    const Matrix a = testutil::random_matrix(3, 4, rng);
    EXPECT_TRUE(gcngrad::exactly_equal(hadamard(a, Matrix::ones(3, 4)), a));
    EXPECT_TRUE(gcngrad::exactly_equal(hadamard(a, Matrix::zeros(3, 4)), Matrix::zeros(3, 4)));
    EXPECT_THROW(hadamard(a, Matrix(4, 3)), std::invalid_argument);
}

TEST(Hadamard, EntrywiseOracle) {
    Matrix a{{1, 2}, {3, 4}};
    Matrix b{{2, 0}, {0, 2}};
    Matrix expected{{2, 0}, {0, 8}};
    EXPECT_TRUE(gcngrad::exactly_equal(hadamard(a, b), expected));
}

TEST(UnitVector, BasisAndColumnExtraction) {
    const Matrix e1 = unit_vector(3, 0);
    EXPECT_DOUBLE_EQ(e1(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(e1(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(e1(2, 0), 0.0);
    EXPECT_TRUE(gcngrad::exactly_equal(unit_vector(1, 0), Matrix{{1}}));
    EXPECT_THROW(unit_vector(3, 3), std::out_of_range);

    // Column extraction M e_j = M_{*j} for a random 3x4 matrix.
    gcngrad::Rng rng(24);
    const Matrix m = testutil::random_matrix(3, 4, rng);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_TRUE(gcngrad::exactly_equal(m * unit_vector(4, j), m.col(j)));
    }
}

TEST(Elementary, OuterProductAndCompleteness) {
    EXPECT_TRUE(gcngrad::exactly_equal(elementary(2, 2, 0, 1), Matrix{{0, 1}, {0, 0}}));
    EXPECT_TRUE(gcngrad::exactly_equal(
        elementary(3, 2, 2, 0),
        unit_vector(3, 2) * gcngrad::transpose(unit_vector(2, 0))));
    Matrix sum(3, 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) sum = sum + elementary(3, 2, i, j);
    EXPECT_TRUE(gcngrad::exactly_equal(sum, Matrix::ones(3, 2)));
    EXPECT_THROW(elementary(2, 2, 2, 0), std::out_of_range);
}

TEST(PermutationU, MatchesDoubleSumOracle) {
    EXPECT_TRUE(gcngrad::exactly_equal(permutation_u(1, 1), Matrix{{1}}));
    for (std::size_t p = 1; p <= 4; ++p) {
        for (std::size_t q = 1; q <= 4; ++q) {
            EXPECT_TRUE(gcngrad::exactly_equal(permutation_u(p, q),
                                               testutil::permutation_u_oracle(p, q)))
                << "p=" << p << " q=" << q;
        }
    }
}

TEST(PermutationU, OneNonzeroPerRowAndColumn) {
    const Matrix u = permutation_u(3, 4);
    for (std::size_t i = 0; i < 12; ++i) {
        double row_sum = 0, col_sum = 0;
        for (std::size_t j = 0; j < 12; ++j) {
            EXPECT_TRUE(u(i, j) == 0.0 || u(i, j) == 1.0);
            row_sum += u(i, j);
            col_sum += u(j, i);
        }
        EXPECT_DOUBLE_EQ(row_sum, 1.0);
        EXPECT_DOUBLE_EQ(col_sum, 1.0);
    }
}

TEST(PermutationU, TransposePairInverts) {
    for (std::size_t p = 1; p <= 4; ++p) {
        for (std::size_t q = 1; q <= 4; ++q) {
            EXPECT_TRUE(gcngrad::exactly_equal(permutation_u(p, q) * permutation_u(q, p),
                                               Matrix::identity(p * q)));
        }
    }
}

TEST(RelatedUbar, MatchesDoubleSumOracle) {
    EXPECT_TRUE(gcngrad::exactly_equal(related_ubar(1, 1), Matrix{{1}}));
    for (std::size_t p = 1; p <= 4; ++p) {
        for (std::size_t q = 1; q <= 4; ++q) {
            EXPECT_TRUE(gcngrad::exactly_equal(related_ubar(p, q),
                                               testutil::related_ubar_oracle(p, q)))
                << "p=" << p << " q=" << q;
        }
    }
}

TEST(RelatedUbar, IsFiniteDifferenceDerivativeOfIdentityMap) {
    // dW/dW under the block layout equals Ubar (property T3), p,q <= 3.
    gcngrad::Rng rng(25);
    for (std::size_t p = 1; p <= 3; ++p) {
        for (std::size_t q = 1; q <= 3; ++q) {
            const Matrix at = testutil::random_matrix(p, q, rng);
            const BlockDerivative fd = gcngrad::fd_block_derivative(
                [](const Matrix& w) { return w; }, at, 1e-6);
            EXPECT_LT(gcngrad::max_abs_diff(fd.payload, related_ubar(p, q)), 1e-9);
        }
    }
}

TEST(BlockDerivative, BlockIndexingAndRoundTrip) {
    // A 1x1-outer derivative is its own single block.
    BlockDerivative whole(1, 1, 2, 3, Matrix{{1, 2, 3}, {4, 5, 6}});
    EXPECT_TRUE(gcngrad::exactly_equal(whole.block(0, 0), whole.payload));

    // Blocks of dW/dW = Ubar are the elementary matrices.
    BlockDerivative dw(3, 2, 3, 2, related_ubar(3, 2));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            EXPECT_TRUE(gcngrad::exactly_equal(dw.block(i, j), elementary(3, 2, i, j)));
    EXPECT_THROW(dw.block(3, 0), std::out_of_range);

    // Random payload round-trips through set_block/block.
    gcngrad::Rng rng(26);
    BlockDerivative d(2, 3, 2, 2);
    std::vector<Matrix> blocks;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            blocks.push_back(testutil::random_matrix(2, 2, rng));
            d.set_block(i, j, blocks.back());
        }
    std::size_t k = 0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_TRUE(gcngrad::exactly_equal(d.block(i, j), blocks[k++]));
        }
    EXPECT_THROW(BlockDerivative(2, 2, 2, 2, Matrix(3, 4)), std::invalid_argument);
}
