#pragma once

#include "qgraph/error.hpp"
#include "qgraph/graph_model.hpp"
#include "qgraph/linalg.hpp"
#include "qgraph/scattering.hpp"
#include "qgraph/secular.hpp"
#include "qgraph/spectrum.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace qgraph {

/**
 * Scale-invariant trace of an eigenfunction at base point z. Entries are
 * grouped per edge, x[4j .. 4j+3] = (A_j, B_j, C_j, D_j), where on edge j
 *   f(t) = A_j cos(k t) + B_j sin(k t) = C_j cos(k(l_j - t)) + D_j sin(k(l_j - t)).
 * Normalized to unit norm with the first significant entry positive real.
 */
struct TraceVector {
    CVector z;
    CVector x;

    [[nodiscard]] std::size_t edge_count() const noexcept { return static_cast<std::size_t>(x.size() / 4); }
    [[nodiscard]] Complex A(std::size_t j) const { return x[static_cast<Eigen::Index>(4 * j)]; }
    [[nodiscard]] Complex B(std::size_t j) const { return x[static_cast<Eigen::Index>(4 * j + 1)]; }
    [[nodiscard]] Complex C(std::size_t j) const { return x[static_cast<Eigen::Index>(4 * j + 2)]; }
    [[nodiscard]] Complex D(std::size_t j) const { return x[static_cast<Eigen::Index>(4 * j + 3)]; }
};

/// Entries below this magnitude are skipped when picking the phase reference.
inline constexpr double significant_entry = 1e-6;

namespace detail {

inline Eigen::Index dirichlet_index(const EdgeEnd& e) {
    return static_cast<Eigen::Index>(4 * e.edge + (e.at_head ? 2 : 0));
}

/// Outgoing k-normalized derivative at this end: B_j at the tail, D_j at the head.
inline Eigen::Index neumann_index(const EdgeEnd& e) {
    return static_cast<Eigen::Index>(4 * e.edge + (e.at_head ? 3 : 1));
}

/// M a is ordered (A_1..A_N, C_1..C_N, B_1..B_N, D_1..D_N); regroup per edge.
inline CVector group_per_edge(const CVector& lifted) {
    const Eigen::Index n = lifted.size() / 4;
    CVector x(4 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        x[4 * j] = lifted[j];
        x[4 * j + 1] = lifted[2 * n + j];
        x[4 * j + 2] = lifted[n + j];
        x[4 * j + 3] = lifted[3 * n + j];
    }
    return x;
}

} // namespace detail

/// Unit norm, first entry with |x_i| >= significant_entry rotated to positive real.
inline CVector normalize_trace(const CVector& x) {
    const double nrm = x.norm();
    if (nrm == 0.0) throw NumericalError("cannot normalize a zero trace");
    CVector y = x / nrm;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (std::abs(y[i]) >= significant_entry) {
            y *= std::conj(y[i]) / std::abs(y[i]);
            break;
        }
    }
    return y;
}

/// max |Im| of the entries after multiplying by the phase that minimizes the imaginary-part norm.
inline double imaginary_residue(const CVector& x) {
    const RVector u = x.real();
    const RVector v = x.imag();
    // Im(e^{i phi} x) = sin(phi) u + cos(phi) v; minimize over (sin, cos) on the unit circle.
    Eigen::Matrix2d q;
    q << u.dot(u), u.dot(v), u.dot(v), v.dot(v);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(q);
    const Eigen::Vector2d sc = es.eigenvectors().col(0);
    return (sc[0] * u + sc[1] * v).cwiseAbs().maxCoeff();
}

/// 2N x 4N matrix of the standard conditions: continuity of Dirichlet values and zero sum of outgoing derivatives.
inline RMatrix standard_vertex_matrix(const MetricGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.edge_count());
    RMatrix p = RMatrix::Zero(2 * n, 4 * n);
    Eigen::Index row = 0;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
        const auto& ends = g.ends_at(v);
        for (std::size_t i = 1; i < ends.size(); ++i) {
            p(row, detail::dirichlet_index(ends[0])) += 1.0;
            p(row, detail::dirichlet_index(ends[i])) -= 1.0;
            ++row;
        }
        for (const auto& e : ends) p(row, detail::neumann_index(e)) += 1.0;
        ++row;
    }
    return p;
}

struct TraceResidualReport {
    double vertex_residual = 0.0;       ///< ||P_std x||
    std::vector<double> edge_residual;  ///< max of the two edge-equation residuals
    std::vector<double> norm_mismatch;  ///< | ||(A,B)|| - ||(C,D)|| |

    [[nodiscard]] double max_edge_residual() const {
        return edge_residual.empty() ? 0.0 : *std::max_element(edge_residual.begin(), edge_residual.end());
    }
    [[nodiscard]] double max_norm_mismatch() const {
        return norm_mismatch.empty() ? 0.0 : *std::max_element(norm_mismatch.begin(), norm_mismatch.end());
    }
};

inline TraceResidualReport trace_residuals(const BondSystem& bs, const CVector& z, const CVector& x) {
    const std::size_t n = bs.edge_count();
    if (static_cast<std::size_t>(x.size()) != 4 * n || static_cast<std::size_t>(z.size()) != n) {
        throw ValidationError("trace or base point has the wrong dimension");
    }
    const Complex i1{0.0, 1.0};
    TraceResidualReport r;
    r.vertex_residual = (standard_vertex_matrix(bs.graph).cast<Complex>() * x).norm();
    for (std::size_t j = 0; j < n; ++j) {
        const auto jj = static_cast<Eigen::Index>(4 * j);
        const Complex a = x[jj], b = x[jj + 1], c = x[jj + 2], d = x[jj + 3];
        const Complex zj = z[static_cast<Eigen::Index>(j)];
        const double e1 = std::abs(a + i1 * b - zj * (c - i1 * d));
        const double e2 = std::abs(c + i1 * d - zj * (a - i1 * b));
        r.edge_residual.push_back(std::max(e1, e2));
        r.norm_mismatch.push_back(std::abs(std::hypot(std::abs(a), std::abs(b)) - std::hypot(std::abs(c), std::abs(d))));
    }
    return r;
}

/**
 * Basis of the trace fiber over z: M applied to an orthonormal kernel basis
 * of I - U(z), regrouped per edge. Multi-dimensional fibers are made real by
 * orthonormalizing the real and imaginary parts of the basis jointly.
 */
inline std::vector<TraceVector> kernel_traces(const BondSystem& bs, const CVector& z,
                                              const ManifoldTolerances& tol = {}) {
    const KernelInfo ker = multiplicity(bs, z, tol);
    if (ker.dimension == 0) throw ValidationError("empty fiber: point is off the secular manifold");
    const Eigen::Index d = ker.dimension;
    const Eigen::Index rows = 4 * static_cast<Eigen::Index>(bs.edge_count());
    CMatrix lifted(rows, d);
    for (Eigen::Index c = 0; c < d; ++c) lifted.col(c) = detail::group_per_edge(bs.M * ker.basis.col(c));

    std::vector<TraceVector> out;
    if (d > 1) {
        RMatrix parts(rows, 2 * d);
        parts.leftCols(d) = lifted.real();
        parts.rightCols(d) = lifted.imag();
        Eigen::JacobiSVD<RMatrix> svd(parts, Eigen::ComputeThinU);
        const RVector sv = svd.singularValues();
        if (sv[d - 1] > 1e-6 * sv[0] && (sv.size() <= d || sv[d] <= 1e-8 * sv[0])) {
            for (Eigen::Index c = 0; c < d; ++c) {
                out.push_back({z, normalize_trace(svd.matrixU().col(c).cast<Complex>())});
            }
            return out;
        }
        // Fiber without a well-conditioned real basis: keep the orthonormalized complex one.
        Eigen::HouseholderQR<CMatrix> qr(lifted);
        const CMatrix q = qr.householderQ() * CMatrix::Identity(rows, d);
        for (Eigen::Index c = 0; c < d; ++c) out.push_back({z, normalize_trace(q.col(c))});
        return out;
    }
    out.push_back({z, normalize_trace(lifted.col(0))});
    return out;
}

/// f on edge j at arc length t from the (A_j, B_j) form.
inline Complex eigenfunction_eval(const TraceVector& t, double k, const RVector& lengths, std::size_t j,
                                  double arc) {
    if (j >= t.edge_count()) throw ValidationError("edge id out of range");
    const double len = lengths[static_cast<Eigen::Index>(j)];
    if (arc < 0.0 || arc > len) throw ValidationError("arc length outside [0, l_j]");
    return t.A(j) * std::cos(k * arc) + t.B(j) * std::sin(k * arc);
}

/// f on edge j at arc length t from the (C_j, D_j) form.
inline Complex eigenfunction_eval_far(const TraceVector& t, double k, const RVector& lengths, std::size_t j,
                                      double arc) {
    if (j >= t.edge_count()) throw ValidationError("edge id out of range");
    const double len = lengths[static_cast<Eigen::Index>(j)];
    if (arc < 0.0 || arc > len) throw ValidationError("arc length outside [0, l_j]");
    return t.C(j) * std::cos(k * (len - arc)) + t.D(j) * std::sin(k * (len - arc));
}

struct NonvanishingReport {
    bool nonvanishing = false;
    double min_entry = 0.0;  ///< smallest |x_i| over the tested entries
    std::size_t min_index = 0;
};

/// Entries B_j / D_j at an end on a degree-one vertex vanish by the Neumann condition and are skipped.
inline NonvanishingReport nonvanishing_test(const MetricGraph& g, const TraceVector& t, double threshold = 1e-6) {
    NonvanishingReport r;
    r.min_entry = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.edge_count(); ++j) {
        const auto& e = g.edge(j);
        for (int slot = 0; slot < 4; ++slot) {
            if (slot == 1 && g.degree(e.tail) == 1) continue;
            if (slot == 3 && g.degree(e.head) == 1) continue;
            const std::size_t idx = 4 * j + static_cast<std::size_t>(slot);
            const double m = std::abs(t.x[static_cast<Eigen::Index>(idx)]);
            if (m < r.min_entry) {
                r.min_entry = m;
                r.min_index = idx;
            }
        }
    }
    r.nonvanishing = r.min_entry > threshold;
    return r;
}

struct SymmetryClass {
    enum class Kind { generic, loop_supported, mandarin_symmetric, mandarin_antisymmetric };
    Kind kind = Kind::generic;
    std::size_t loop_edge = 0; ///< meaningful for loop_supported
    double tolerance = 0.0;
};

inline const char* to_string(SymmetryClass::Kind k) {
    switch (k) {
    case SymmetryClass::Kind::generic: return "generic";
    case SymmetryClass::Kind::loop_supported: return "loop_supported";
    case SymmetryClass::Kind::mandarin_symmetric: return "mandarin_symmetric";
    case SymmetryClass::Kind::mandarin_antisymmetric: return "mandarin_antisymmetric";
    }
    return "?";
}

inline constexpr double classification_tolerance = 1e-7;

/// Trace vanishes off loop j, A_j = C_j = 0 and D_j = -B_j.
inline bool is_loop_supported(const TraceVector& t, std::size_t j, double tol = classification_tolerance) {
    for (std::size_t i = 0; i < 4 * t.edge_count(); ++i) {
        if (i / 4 == j) continue;
        if (std::abs(t.x[static_cast<Eigen::Index>(i)]) > tol) return false;
    }
    return std::abs(t.A(j)) <= tol && std::abs(t.C(j)) <= tol && std::abs(t.B(j) + t.D(j)) <= tol;
}

/// (A_j, B_j) = (C_j, D_j) on every loop.
inline bool is_symmetric_on_loops(const GraphClass& cls, const TraceVector& t,
                                  double tol = classification_tolerance) {
    for (const auto j : cls.loop_edges) {
        if (std::abs(t.A(j) - t.C(j)) > tol || std::abs(t.B(j) - t.D(j)) > tol) return false;
    }
    return true;
}

/**
 * Reflection-symmetry class of a trace. Intended for simple eigenvalues,
 * where the class is forced; a mandarin trace matching neither sign pattern
 * raises NumericalError("unclassified").
 */
inline SymmetryClass classify_symmetry(const MetricGraph& g, const GraphClass& cls, const TraceVector& t,
                                       double tol = classification_tolerance) {
    SymmetryClass out;
    out.tolerance = tol;
    if (cls.is_mandarin) {
        double sym = 0.0;
        double anti = 0.0;
        for (std::size_t j = 0; j < g.edge_count(); ++j) {
            sym = std::max({sym, std::abs(t.A(j) - t.C(j)), std::abs(t.B(j) - t.D(j))});
            anti = std::max({anti, std::abs(t.A(j) + t.C(j)), std::abs(t.B(j) + t.D(j))});
        }
        if (sym <= tol) {
            out.kind = SymmetryClass::Kind::mandarin_symmetric;
        } else if (anti <= tol) {
            out.kind = SymmetryClass::Kind::mandarin_antisymmetric;
        } else {
            char buf[160];
            std::snprintf(buf, sizeof buf, "unclassified: symmetric deviation %.3e, antisymmetric deviation %.3e",
                          sym, anti);
            throw NumericalError(buf);
        }
        return out;
    }
    for (const auto j : cls.loop_edges) {
        if (is_loop_supported(t, j, tol)) {
            out.kind = SymmetryClass::Kind::loop_supported;
            out.loop_edge = j;
            return out;
        }
    }
    return out;
}

struct EdgeSupportTolerances {
    double amplitude = 1e-5; ///< on ||(A_j, B_j)|| of the unit-norm trace
    double gradient = 2e-10; ///< on |dP/dz_j| / ||grad P||
};

struct EdgeSupportReport {
    std::vector<bool> vanishes_by_amplitude;
    std::vector<bool> vanishes_by_gradient;
    std::vector<double> amplitude;      ///< ||(A_j, B_j)||
    std::vector<double> gradient_ratio; ///< |dP/dz_j| / ||grad P||

    [[nodiscard]] bool consistent() const { return vanishes_by_amplitude == vanishes_by_gradient; }
};

/// Both detectors without the consistency check.
inline EdgeSupportReport edge_support_tests(const BondSystem& bs, const CVector& z, const TraceVector& t,
                                            const EdgeSupportTolerances& tol = {}) {
    const CVector grad = secular_gradient(bs, z);
    const double gnorm = grad.norm();
    EdgeSupportReport r;
    for (std::size_t j = 0; j < bs.edge_count(); ++j) {
        const double amp = std::hypot(std::abs(t.A(j)), std::abs(t.B(j)));
        const double ratio = gnorm > 0.0 ? std::abs(grad[static_cast<Eigen::Index>(j)]) / gnorm : 0.0;
        r.amplitude.push_back(amp);
        r.gradient_ratio.push_back(ratio);
        r.vanishes_by_amplitude.push_back(amp <= tol.amplitude);
        r.vanishes_by_gradient.push_back(ratio <= tol.gradient);
    }
    return r;
}

/// Per-edge "f vanishes identically on e_j" at a regular point; the two detectors must agree.
inline std::vector<bool> edge_support(const BondSystem& bs, const CVector& z, const TraceVector& t,
                                      const EdgeSupportTolerances& tol = {}) {
    const auto r = edge_support_tests(bs, z, t, tol);
    if (!r.consistent()) {
        std::string msg = "support tests inconsistent:";
        for (std::size_t j = 0; j < r.amplitude.size(); ++j) {
            char buf[120];
            std::snprintf(buf, sizeof buf, " edge %zu amplitude %.3e gradient ratio %.3e;", j, r.amplitude[j],
                          r.gradient_ratio[j]);
            msg += buf;
        }
        throw NumericalError(msg);
    }
    return r.vanishes_by_amplitude;
}

/// First line "k,<k>,z,<re>,<im>,...", then the column header, then one row per edge (15 significant digits).
inline std::string export_trace(const TraceVector& t, double k) {
    char buf[64];
    std::string out = "k,";
    std::snprintf(buf, sizeof buf, "%.15g", k);
    out += buf;
    out += ",z";
    for (Eigen::Index j = 0; j < t.z.size(); ++j) {
        std::snprintf(buf, sizeof buf, ",%.15g,%.15g", t.z[j].real() + 0.0, t.z[j].imag() + 0.0);
        out += buf;
    }
    out += "\nedge_id,A_re,A_im,B_re,B_im,C_re,C_im,D_re,D_im\n";
    for (std::size_t j = 0; j < t.edge_count(); ++j) {
        out += std::to_string(j);
        for (int s = 0; s < 4; ++s) {
            const Complex v = t.x[static_cast<Eigen::Index>(4 * j + static_cast<std::size_t>(s))];
            std::snprintf(buf, sizeof buf, ",%.15g,%.15g", v.real() + 0.0, v.imag() + 0.0);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

} // namespace qgraph
