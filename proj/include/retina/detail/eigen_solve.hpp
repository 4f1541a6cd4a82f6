#pragma once

#include <complex>
#include <string>

#include <Eigen/Dense>

#ifndef lapack_complex_double
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include "retina/error.hpp"

namespace retina::detail {

struct EigenDecomposition {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd vectors;
};

// General complex eigenproblem via LAPACK zgeev. Failure is reported, never patched.
inline EigenDecomposition eigen_decompose(Eigen::MatrixXcd a) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    EigenDecomposition out{Eigen::VectorXcd(n), Eigen::MatrixXcd(n, n)};
    if (n == 0) return out;
    std::complex<double> dummy;
    lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'V', n, a.data(), n, out.values.data(),
                                    &dummy, 1, out.vectors.data(), n);
    if (info != 0) {
        throw ComputationError("eigendecomposition failed (zgeev info = " + std::to_string(info) +
                               ")");
    }
    return out;
}

}  // namespace retina::detail
