#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>

namespace qgraph {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Determinant and adjugate of a square matrix, produced together.
struct DetAdj {
    Complex det;
    CMatrix adj;
};

/**
 * Faddeev-LeVerrier recursion.
 *
 * Builds the characteristic-polynomial coefficients c_k of A alongside the
 * auxiliary matrices M_k = A M_{k-1} + c_{n-k+1} I. Then
 * det(A) = (-1)^n c_0 and adj(A) = (-1)^{n-1} M_n. No division by det(A)
 * occurs, so the adjugate stays correct when A is singular.
 *
 * Coefficient growth limits accuracy for large n; intended for n <= ~30
 * with ||A|| = O(1).
 */
inline DetAdj faddeev_leverrier(const CMatrix& a) {
    const Eigen::Index n = a.rows();
    if (n == 0) {
        return {Complex{1.0, 0.0}, CMatrix(0, 0)};
    }
    CMatrix m(n, n);
    CMatrix am = CMatrix::Zero(n, n); // A M_{k-1}, with M_0 = 0
    Complex c{1.0, 0.0};              // c_n
    for (Eigen::Index k = 1; k <= n; ++k) {
        m = am;
        m.diagonal().array() += c;
        am.noalias() = a * m;
        c = -am.trace() / static_cast<double>(k);
    }
    // After the loop m == M_n and c == c_0.
    const double sign_n = (n % 2 == 0) ? 1.0 : -1.0;
    return {sign_n * c, -sign_n * m};
}

/// Maps an angle to [0, 2*pi).
inline double wrap_phase(double theta) {
    double w = std::fmod(theta, two_pi);
    if (w < 0.0) w += two_pi;
    if (w >= two_pi) w = 0.0;
    return w;
}

/// exp(i * k * lengths), a point on the N-torus.
inline CVector torus_point(const RVector& lengths, double k) {
    CVector z(lengths.size());
    for (Eigen::Index j = 0; j < lengths.size(); ++j) {
        z[j] = std::polar(1.0, k * lengths[j]);
    }
    return z;
}

/// Singular values in ascending order.
inline RVector singular_values_ascending(const CMatrix& a) {
    Eigen::JacobiSVD<CMatrix> svd(a);
    return svd.singularValues().reverse();
}

} // namespace qgraph
