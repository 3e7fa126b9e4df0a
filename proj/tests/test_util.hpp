#pragma once

#include "jch/linalg.hpp"

#include <random>

namespace testutil {

inline jch::ComplexMatrix random_matrix(jch::Index r, jch::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    jch::ComplexMatrix m(r, c);
    for (jch::Index i = 0; i < r; ++i)
        for (jch::Index j = 0; j < c; ++j) m(i, j) = {n(rng), n(rng)};
    return m;
}

inline jch::ComplexMatrix random_hermitian(jch::Index d, std::mt19937_64& rng) {
    const jch::ComplexMatrix a = random_matrix(d, d, rng);
    return 0.5 * (a + a.adjoint());
}

inline jch::DensityMatrix random_density(jch::Index d, std::mt19937_64& rng) {
    const jch::ComplexMatrix a = random_matrix(d, d, rng);
    jch::DensityMatrix rho = a * a.adjoint();
    return rho / rho.trace().real();
}

inline jch::ComplexMatrix random_unitary(jch::Index d, std::mt19937_64& rng) {
    Eigen::HouseholderQR<jch::ComplexMatrix> qr(random_matrix(d, d, rng));
    return qr.householderQ();
}

}  // namespace testutil
