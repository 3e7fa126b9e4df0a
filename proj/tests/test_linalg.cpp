#include "jch/linalg.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace jch;

namespace {

ComplexMatrix pauli_x() {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 1) = m(1, 0) = 1.0;
    return m;
}

}  // namespace

TEST(Kron, DimensionsAndMixedProduct) {
    std::mt19937_64 rng(1);
    const auto A = testutil::random_matrix(2, 3, rng), B = testutil::random_matrix(3, 2, rng);
    const auto C = testutil::random_matrix(3, 2, rng), D = testutil::random_matrix(2, 4, rng);
    const ComplexMatrix AB = kron(A, B);
    EXPECT_EQ(AB.rows(), 6);
    EXPECT_EQ(AB.cols(), 6);
    EXPECT_LT(max_abs_diff(kron(A, B) * kron(C, D), kron(A * C, B * D)), 1e-12);
}

TEST(Kron, IdentityAndEntryLayout) {
    const ComplexMatrix I2 = ComplexMatrix::Identity(2, 2), I3 = ComplexMatrix::Identity(3, 3);
    EXPECT_EQ(max_abs_diff(kron(I2, I3), ComplexMatrix::Identity(6, 6)), 0.0);
    ComplexMatrix a(1, 2);
    a << 1.0, 2.0;
    ComplexMatrix b(2, 1);
    b << 3.0, 5.0;
    const ComplexMatrix k = kron(a, b);
    // (a (x) b)(i*2 + r, j + c) = a(i, j) b(r, c)
    EXPECT_EQ(k(0, 0), cplx(3.0));
    EXPECT_EQ(k(1, 0), cplx(5.0));
    EXPECT_EQ(k(0, 1), cplx(6.0));
    EXPECT_EQ(k(1, 1), cplx(10.0));
}

TEST(Kron, CapIsEnforcedBeforeAllocation) {
    const ComplexMatrix big = ComplexMatrix::Identity(100, 100);
    EXPECT_THROW(kron(big, big), SizeError);
    EXPECT_THROW(kron(big, big, 9999), SizeError);
    EXPECT_NO_THROW(kron(big, big, 10000));
}

TEST(Kron, VectorsAndEmbedding) {
    std::mt19937_64 rng(2);
    const StateVector u = testutil::random_matrix(2, 1, rng).col(0), v = testutil::random_matrix(3, 1, rng).col(0);
    const StateVector w = kron_vectors({u, v});
    EXPECT_LT((w - kron(ComplexMatrix(u), ComplexMatrix(v)).col(0)).norm(), 1e-14);

    const auto op = testutil::random_matrix(3, 3, rng);
    const TensorDims dims{2, 3, 4};
    const ComplexMatrix e = embed_site_operator(op, dims, 1);
    const ComplexMatrix ref = kron(kron(ComplexMatrix::Identity(2, 2), op), ComplexMatrix::Identity(4, 4));
    EXPECT_LT(max_abs_diff(e, ref), 1e-15);
    EXPECT_THROW(embed_site_operator(op, dims, 0), SizeError);
    EXPECT_THROW(embed_site_operator(op, dims, 3), SizeError);
}

TEST(Eigen, PauliAndRandomHermitian) {
    const auto ev = hermitian_eigenvalues(pauli_x());
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_NEAR(ev[0], -1.0, 1e-14);
    EXPECT_NEAR(ev[1], 1.0, 1e-14);

    std::mt19937_64 rng(3);
    const ComplexMatrix h = testutil::random_hermitian(7, rng);
    const auto e = hermitian_eigenvalues(h);
    double sum = 0.0, sq = 0.0;
    for (double x : e) sum += x, sq += x * x;
    EXPECT_NEAR(sum, h.trace().real(), 1e-10);
    EXPECT_NEAR(sq, (h * h).trace().real(), 1e-9);
    EXPECT_TRUE(std::is_sorted(e.begin(), e.end()));
}

TEST(Eigen, RejectsBadInput) {
    ComplexMatrix nh = ComplexMatrix::Zero(2, 2);
    nh(0, 1) = 1.0;
    EXPECT_THROW(hermitian_eigenvalues(nh), ContractError);
    EXPECT_THROW(hermitian_eigenvalues(ComplexMatrix::Zero(2, 3)), ContractError);
    ComplexMatrix nan = ComplexMatrix::Identity(2, 2);
    nan(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(hermitian_eigenvalues(nan), ContractError);
}

TEST(PartialTranspose, ProductStateAndInvolution) {
    std::mt19937_64 rng(4);
    const DensityMatrix a = testutil::random_density(2, rng), b = testutil::random_density(3, rng);
    const TensorDims dims{2, 3};
    const DensityMatrix rho = kron(a, b);
    EXPECT_LT(max_abs_diff(partial_transpose(rho, dims, 1), kron(a, b.transpose())), 1e-14);
    EXPECT_LT(max_abs_diff(partial_transpose(rho, dims, 0), kron(a.transpose(), b)), 1e-14);

    const DensityMatrix r = testutil::random_density(6, rng);
    EXPECT_LT(max_abs_diff(partial_transpose(partial_transpose(r, dims, 1), dims, 1), r), 1e-15);
    // transposing A is the full transpose of transposing B
    EXPECT_LT(max_abs_diff(partial_transpose(r, dims, 0), partial_transpose(r, dims, 1).transpose()), 1e-15);
}

TEST(PartialTranspose, ThreeFactorsMiddle) {
    std::mt19937_64 rng(5);
    const DensityMatrix a = testutil::random_density(2, rng), b = testutil::random_density(3, rng),
                        c = testutil::random_density(2, rng);
    const DensityMatrix rho = kron(kron(a, b), c);
    EXPECT_LT(max_abs_diff(partial_transpose(rho, TensorDims{2, 3, 2}, 1), kron(kron(a, b.transpose()), c)), 1e-14);
}

TEST(PartialTrace, ProductAndMixture) {
    std::mt19937_64 rng(6);
    const DensityMatrix a = testutil::random_density(2, rng), b = testutil::random_density(3, rng),
                        c = testutil::random_density(4, rng);
    const TensorDims dims{2, 3, 4};
    const DensityMatrix rho = kron(kron(a, b), c);
    EXPECT_LT(max_abs_diff(partial_trace(rho, dims, 0), a), 1e-14);
    EXPECT_LT(max_abs_diff(partial_trace(rho, dims, 1), b), 1e-14);
    EXPECT_LT(max_abs_diff(partial_trace(rho, dims, 2), c), 1e-14);
    const DensityMatrix r = testutil::random_density(24, rng);
    EXPECT_NEAR(partial_trace(r, dims, 1).trace().real(), 1.0, 1e-13);
}

TEST(PartialOps, DimensionErrors) {
    const DensityMatrix r = DensityMatrix::Identity(6, 6) / 6.0;
    EXPECT_THROW(partial_transpose(r, TensorDims{2, 2}, 0), SizeError);
    EXPECT_THROW(partial_transpose(r, TensorDims{2, 3}, 2), SizeError);
    EXPECT_THROW(partial_trace(ComplexMatrix::Zero(6, 5), TensorDims{2, 3}, 0), SizeError);
}

TEST(Dump, RowMajorCsv) {
    ComplexMatrix m(2, 2);
    m << cplx(1, 0), cplx(0, 2), cplx(-0.5, 0), cplx(0.1, -3);
    std::ostringstream os;
    write_csv(os, m);
    EXPECT_EQ(os.str(), "row,col,re,im\n0,0,1,0\n0,1,0,2\n1,0,-0.5,0\n1,1,0.1,-3\n");
}

TEST(Predicates, HermiticityAndFinite) {
    EXPECT_EQ(hermiticity_error(pauli_x()), 0.0);
    EXPECT_TRUE(std::isinf(hermiticity_error(ComplexMatrix::Zero(2, 3))));
    EXPECT_TRUE(all_finite(pauli_x()));
    EXPECT_THROW(max_abs_diff(ComplexMatrix::Zero(2, 2), ComplexMatrix::Zero(3, 3)), SizeError);
    EXPECT_EQ(checked_product(3, 4), 12);
    EXPECT_THROW(checked_product(0, 4), SizeError);
}
