// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "irsloc/common.hpp"

namespace irsloc {

/// Hermitian Toeplitz matrix with first row u: T[i][j] = u[j-i] for j >= i, conjugate below.
inline MatC toeplitz(const VecC& u) {
    if (u.size() == 0) throw DomainError("empty Toeplitz parameter");
    if (std::abs(u[0].imag()) > 1e-12) throw DomainError("Toeplitz parameter u[0] must be real");
    const Eigen::Index n = u.size();
    MatC t(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        t(i, i) = u[0].real();
        for (Eigen::Index j = i + 1; j < n; ++j) {
            t(i, j) = u[j - i];
            t(j, i) = std::conj(u[j - i]);
        }
    }
    return t;
}

/// Adjoint of toeplitz() under <A,B> = Re tr(A^H B) for Hermitian X: entry 0 is the trace, entry n the doubled
/// sum of superdiagonal n.
inline VecC toeplitz_adjoint(const MatC& x) {
    if (x.rows() != x.cols()) throw DomainError("toeplitz_adjoint needs a square matrix");
    const Eigen::Index n = x.rows();
    VecC f = VecC::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) f[0] += x(i, i);
    for (Eigen::Index d = 1; d < n; ++d) {
        cplx s = 0.0;
        for (Eigen::Index i = 0; i + d < n; ++i) s += x(i, i + d);
        f[d] = 2.0 * s;
    }
    return f;
}

/// Diagonal of toeplitz_adjoint o toeplitz: g_0 = n, g_d = 2 (n - d).
inline VecR toeplitz_gram(Eigen::Index n) {
    VecR g(n);
    g[0] = static_cast<double>(n);
    for (Eigen::Index d = 1; d < n; ++d) g[d] = 2.0 * static_cast<double>(n - d);
    return g;
}

struct PsdProjection {
    MatC matrix;
    double min_eigenvalue = 0.0;  // of the input
};

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clamped to zero).
inline PsdProjection psd_project_ex(const MatC& x) {
    const MatC h = 0.5 * (x + x.adjoint());
    Eigen::SelfAdjointEigenSolver<MatC> es(h);
    const VecR ev = es.eigenvalues();
    const VecR clamped = ev.cwiseMax(0.0);
    PsdProjection p;
    p.min_eigenvalue = ev.size() ? ev(0) : 0.0;
    const MatC& v = es.eigenvectors();
    p.matrix = v * clamped.cast<cplx>().asDiagonal() * v.adjoint();
    p.matrix = 0.5 * (p.matrix + p.matrix.adjoint()).eval();
    return p;
}

inline MatC psd_project(const MatC& x) { return psd_project_ex(x).matrix; }

}  // namespace irsloc
