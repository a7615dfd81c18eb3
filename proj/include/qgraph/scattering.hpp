#pragma once

#include "qgraph/error.hpp"
#include "qgraph/graph_model.hpp"
#include "qgraph/linalg.hpp"

#include <random>

namespace qgraph {

/**
 * Directed-bond description of a graph with standard vertex conditions.
 *
 * Bond j is edge j traversed tail -> head, bond N + j the reverse. With
 * amplitude vector a = (a_1..a_N, b_1..b_N), an eigenfunction at k satisfies
 * U(z) a = a for z = exp(i k l) and U(z) = diag(z, z) S.
 */
struct BondSystem {
    MetricGraph graph;
    RMatrix S; ///< 2N x 2N real orthogonal, independent of l and k
    RMatrix J; ///< block swap of forward and reverse bonds
    CMatrix M; ///< 4N x 2N trace lift, (S + J ; i (S - J))
    bool reversed_convention = false; ///< true if S had to be replaced by J S J

    [[nodiscard]] std::size_t edge_count() const noexcept { return graph.edge_count(); }
    [[nodiscard]] Eigen::Index bond_count() const noexcept {
        return static_cast<Eigen::Index>(2 * graph.edge_count());
    }
};

namespace detail {

inline std::size_t bond_origin(const MetricGraph& g, std::size_t bond) {
    const std::size_t n = g.edge_count();
    return bond < n ? g.edge(bond).tail : g.edge(bond - n).head;
}

inline std::size_t bond_terminus(const MetricGraph& g, std::size_t bond) {
    const std::size_t n = g.edge_count();
    return bond < n ? g.edge(bond).head : g.edge(bond - n).tail;
}

inline std::size_t bond_reversal(std::size_t bond, std::size_t n) {
    return bond < n ? bond + n : bond - n;
}

/// S_{beta,alpha} = 2/deg(v) - [beta reverses alpha] when alpha ends where beta starts.
inline RMatrix vertex_scattering(const MetricGraph& g) {
    const std::size_t n = g.edge_count();
    RMatrix s = RMatrix::Zero(static_cast<Eigen::Index>(2 * n), static_cast<Eigen::Index>(2 * n));
    for (std::size_t alpha = 0; alpha < 2 * n; ++alpha) {
        const std::size_t v = bond_terminus(g, alpha);
        const double transmit = 2.0 / static_cast<double>(g.degree(v));
        for (std::size_t beta = 0; beta < 2 * n; ++beta) {
            if (bond_origin(g, beta) != v) continue;
            const double back = (beta == bond_reversal(alpha, n)) ? 1.0 : 0.0;
            s(static_cast<Eigen::Index>(beta), static_cast<Eigen::Index>(alpha)) = transmit - back;
        }
    }
    return s;
}

inline RMatrix block_swap(std::size_t n) {
    const auto nn = static_cast<Eigen::Index>(n);
    RMatrix j = RMatrix::Zero(2 * nn, 2 * nn);
    j.topRightCorner(nn, nn).setIdentity();
    j.bottomLeftCorner(nn, nn).setIdentity();
    return j;
}

inline CMatrix trace_lift(const RMatrix& s, const RMatrix& j) {
    const Eigen::Index b = s.rows();
    CMatrix m(2 * b, b);
    m.topRows(b) = (s + j).cast<Complex>();
    m.bottomRows(b) = Complex{0.0, 1.0} * (s - j).cast<Complex>();
    return m;
}

inline CMatrix apply_diag(const RMatrix& s, const CVector& z) {
    const Eigen::Index n = z.size();
    CMatrix u = s.cast<Complex>();
    for (Eigen::Index r = 0; r < n; ++r) {
        u.row(r) *= z[r];
        u.row(r + n) *= z[r];
    }
    return u;
}

/// Loop identity: a_loop = e_j - e_{N+j} satisfies U(z) a = z_j a.
inline bool loop_identity_holds(const MetricGraph& g, const RMatrix& s) {
    const auto n = static_cast<Eigen::Index>(g.edge_count());
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> phase(0.0, two_pi);
    for (std::size_t jj = 0; jj < g.edge_count(); ++jj) {
        if (!g.edge(jj).is_loop()) continue;
        const auto j = static_cast<Eigen::Index>(jj);
        for (int trial = 0; trial < 4; ++trial) {
            CVector z(n);
            for (Eigen::Index i = 0; i < n; ++i) z[i] = std::polar(1.0, phase(rng));
            CVector a = CVector::Zero(2 * n);
            a[j] = 1.0;
            a[n + j] = -1.0;
            const CVector lhs = apply_diag(s, z) * a;
            if ((lhs - z[j] * a).norm() > 1e-12) return false;
        }
    }
    return true;
}

/// Builder applied to the single interval must reproduce k l = n pi.
inline bool interval_spectrum_holds(bool reversed) {
    const MetricGraph g = graphs::interval(1.0);
    RMatrix s = vertex_scattering(g);
    if (reversed) {
        const RMatrix j = block_swap(1);
        s = j * s * j;
    }
    const auto p = [&](double k) {
        CVector z(1);
        z[0] = std::polar(1.0, k);
        const CMatrix a = CMatrix::Identity(2, 2) - apply_diag(s, z);
        return std::abs(a.determinant());
    };
    for (int m = 1; m <= 4; ++m) {
        if (p(m * std::numbers::pi) > 1e-12) return false;
        if (p((m + 0.5) * std::numbers::pi) < 1e-3) return false;
    }
    return true;
}

inline bool convention_holds(const MetricGraph& g, const RMatrix& s, bool reversed) {
    const RMatrix id = RMatrix::Identity(s.rows(), s.cols());
    return (s * s.transpose() - id).norm() <= 1e-13 && loop_identity_holds(g, s) &&
           interval_spectrum_holds(reversed);
}

} // namespace detail

inline BondSystem build_bond_scattering(const MetricGraph& g) {
    const std::size_t n = g.edge_count();
    BondSystem bs{g, detail::vertex_scattering(g), detail::block_swap(n), CMatrix(), false};
    if (!detail::convention_holds(g, bs.S, false)) {
        bs.S = bs.J * bs.S * bs.J;
        bs.reversed_convention = true;
        if (!detail::convention_holds(g, bs.S, true)) {
            throw NumericalError("scattering convention error");
        }
    }
    bs.M = detail::trace_lift(bs.S, bs.J);
    return bs;
}

enum class TorusCheck { enforce, waive };

/// U(z) = diag(z, z) S. With TorusCheck::enforce, |z_j| must be 1 to 1e-12.
inline CMatrix evaluate_U(const BondSystem& bs, const CVector& z, TorusCheck check = TorusCheck::enforce) {
    if (z.size() != static_cast<Eigen::Index>(bs.edge_count())) {
        throw ValidationError("torus point has the wrong dimension");
    }
    if (check == TorusCheck::enforce) {
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            if (std::abs(std::abs(z[j]) - 1.0) > 1e-12) {
                throw ValidationError("point is not on the torus");
            }
        }
    }
    return detail::apply_diag(bs.S, z);
}

} // namespace qgraph
