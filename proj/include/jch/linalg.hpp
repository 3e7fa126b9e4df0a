// linalg.hpp - dense complex linear algebra on tensor-product spaces
//
// Matrices are Eigen::MatrixXcd. Serialized dumps are row-major
// ("row,col,re,im" per entry) so that files compare bit-for-bit across runs.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace jch {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;
using DensityMatrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

// ------------------------------------------------------------------ errors

struct SizeError : std::length_error {
    using std::length_error::length_error;
};
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};
struct TruncationError : std::out_of_range {
    using std::out_of_range::out_of_range;
};
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct IntegratorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Largest matrix/vector dimension any builder will allocate.
inline constexpr Index kDefaultMaxDim = 4096;

inline constexpr double kHermitianTol = 1e-10;

// ------------------------------------------------------------- tensor dims

struct TensorDims {
    std::vector<Index> factors;

    TensorDims() = default;
    TensorDims(std::initializer_list<Index> f) : factors(f) {}
    explicit TensorDims(std::vector<Index> f) : factors(std::move(f)) {}

    std::size_t size() const noexcept { return factors.size(); }
    Index operator[](std::size_t i) const { return factors.at(i); }

    Index total() const {
        Index t = 1;
        for (Index f : factors) t *= f;
        return t;
    }

    bool operator==(const TensorDims&) const = default;
};

inline Index checked_product(Index a, Index b, Index max_dim = kDefaultMaxDim) {
    if (a <= 0 || b <= 0) throw SizeError("checked_product: non-positive dimension");
    if (a > max_dim / b) {
        throw SizeError("dimension " + std::to_string(a) + "x" + std::to_string(b) +
                        " exceeds cap " + std::to_string(max_dim));
    }
    return a * b;
}

// --------------------------------------------------------------- predicates

inline bool all_finite(const ComplexMatrix& m) {
    for (Index i = 0; i < m.size(); ++i) {
        const cplx z = m.data()[i];
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

/// max |m - m^dagger| entrywise; +inf for non-square input.
inline double hermiticity_error(const ComplexMatrix& m) {
    if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
    if (m.size() == 0) return 0.0;
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw SizeError("max_abs_diff: shape mismatch");
    }
    if (a.size() == 0) return 0.0;
    return (a - b).cwiseAbs().maxCoeff();
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
    return a * b - b * a;
}

// ---------------------------------------------------------------- products

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b,
                          Index max_dim = kDefaultMaxDim) {
    const Index rows = checked_product(a.rows(), b.rows(), max_dim);
    const Index cols = checked_product(a.cols(), b.cols(), max_dim);
    ComplexMatrix out(rows, cols);
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

inline ComplexMatrix kron_all(const std::vector<ComplexMatrix>& factors,
                              Index max_dim = kDefaultMaxDim) {
    if (factors.empty()) return ComplexMatrix::Identity(1, 1);
    ComplexMatrix out = factors.front();
    for (std::size_t k = 1; k < factors.size(); ++k) out = kron(out, factors[k], max_dim);
    return out;
}

inline StateVector kron_vectors(const std::vector<StateVector>& factors,
                                Index max_dim = kDefaultMaxDim) {
    StateVector out = StateVector::Ones(1);
    for (const auto& f : factors) {
        const Index n = checked_product(out.size(), f.size(), max_dim);
        StateVector next(n);
        for (Index i = 0; i < out.size(); ++i) next.segment(i * f.size(), f.size()) = out(i) * f;
        out = std::move(next);
    }
    return out;
}

/// I_{left} (x) op (x) I_{right} with `op` sitting on factor `site` of `dims`.
inline ComplexMatrix embed_site_operator(const ComplexMatrix& op, const TensorDims& dims,
                                         std::size_t site, Index max_dim = kDefaultMaxDim) {
    if (site >= dims.size()) throw SizeError("embed_site_operator: site out of range");
    if (op.rows() != dims[site] || op.cols() != dims[site]) {
        throw SizeError("embed_site_operator: operator does not match factor dimension");
    }
    Index left = 1, right = 1;
    for (std::size_t k = 0; k < site; ++k) left = checked_product(left, dims[k], max_dim);
    for (std::size_t k = site + 1; k < dims.size(); ++k) right = checked_product(right, dims[k], max_dim);
    checked_product(checked_product(left, op.rows(), max_dim), right, max_dim);
    return kron(kron(ComplexMatrix::Identity(left, left), op, max_dim),
                ComplexMatrix::Identity(right, right), max_dim);
}

// ------------------------------------------------------------ eigenvalues

/// Ascending real spectrum of a Hermitian matrix.
inline std::vector<double> hermitian_eigenvalues(const ComplexMatrix& m,
                                                 double tol = kHermitianTol) {
    if (m.rows() != m.cols()) throw ContractError("hermitian_eigenvalues: matrix not square");
    if (!all_finite(m)) throw ContractError("hermitian_eigenvalues: non-finite entries");
    const double herr = hermiticity_error(m);
    if (herr > tol) {
        throw ContractError("hermitian_eigenvalues: matrix not Hermitian (max |m - m^dag| = " +
                            std::to_string(herr) + ")");
    }
    if (m.size() == 0) return {};
    // symmetrize so round-off in the lower triangle cannot leak into the solver
    const ComplexMatrix sym = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw std::runtime_error("hermitian_eigenvalues: solver failed");
    const Eigen::VectorXd& ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

// ------------------------------------------------- partial transpose/trace

namespace detail {

inline void check_bipartite_operator(const ComplexMatrix& rho, const TensorDims& dims,
                                     std::size_t which, const char* who) {
    if (rho.rows() != rho.cols()) throw SizeError(std::string(who) + ": matrix not square");
    if (dims.size() == 0 || which >= dims.size()) {
        throw SizeError(std::string(who) + ": factor index out of range");
    }
    if (dims.total() != rho.rows()) {
        throw SizeError(std::string(who) + ": dims product " + std::to_string(dims.total()) +
                        " != matrix dimension " + std::to_string(rho.rows()));
    }
}

// Split dims around factor `which`: (outer-left, factor, inner-right).
inline std::array<Index, 3> split_dims(const TensorDims& dims, std::size_t which) {
    Index left = 1, right = 1;
    for (std::size_t k = 0; k < which; ++k) left *= dims[k];
    for (std::size_t k = which + 1; k < dims.size(); ++k) right *= dims[k];
    return {left, dims[which], right};
}

}  // namespace detail

/// Transpose the indices of tensor factor `which`.
inline ComplexMatrix partial_transpose(const ComplexMatrix& rho, const TensorDims& dims,
                                       std::size_t which) {
    detail::check_bipartite_operator(rho, dims, which, "partial_transpose");
    const auto [L, F, R] = detail::split_dims(dims, which);
    ComplexMatrix out(rho.rows(), rho.cols());
    // index = (l * F + f) * R + r
    for (Index l1 = 0; l1 < L; ++l1)
        for (Index f1 = 0; f1 < F; ++f1)
            for (Index r1 = 0; r1 < R; ++r1) {
                const Index row = (l1 * F + f1) * R + r1;
                for (Index l2 = 0; l2 < L; ++l2)
                    for (Index f2 = 0; f2 < F; ++f2)
                        for (Index r2 = 0; r2 < R; ++r2) {
                            const Index col = (l2 * F + f2) * R + r2;
                            out((l1 * F + f2) * R + r1, (l2 * F + f1) * R + r2) = rho(row, col);
                        }
            }
    return out;
}

/// Reduced operator on factor `keep`, all other factors traced out.
inline ComplexMatrix partial_trace(const ComplexMatrix& rho, const TensorDims& dims,
                                   std::size_t keep) {
    detail::check_bipartite_operator(rho, dims, keep, "partial_trace");
    const auto [L, F, R] = detail::split_dims(dims, keep);
    ComplexMatrix out = ComplexMatrix::Zero(F, F);
    for (Index f1 = 0; f1 < F; ++f1)
        for (Index f2 = 0; f2 < F; ++f2) {
            cplx acc{0.0, 0.0};
            for (Index l = 0; l < L; ++l)
                for (Index r = 0; r < R; ++r) acc += rho((l * F + f1) * R + r, (l * F + f2) * R + r);
            out(f1, f2) = acc;
        }
    return out;
}

// ---------------------------------------------------------------- dumping

inline std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

/// Debug dump, one "row,col,re,im" line per entry in row-major order.
inline void write_csv(std::ostream& os, const ComplexMatrix& m) {
    os << "row,col,re,im\n";
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            os << i << ',' << j << ',' << format_double(m(i, j).real()) << ','
               << format_double(m(i, j).imag()) << '\n';
}

}  // namespace jch
