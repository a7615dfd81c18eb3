#pragma once

#include "qgraph/error.hpp"
#include "qgraph/graph_model.hpp"
#include "qgraph/linalg.hpp"
#include "qgraph/scattering.hpp"

#include <array>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace qgraph {

/// Rank thresholds on the singular values of I - U(z).
struct ManifoldTolerances {
    double on_manifold = 1e-10; ///< scaled by 2N: smallest singular value at or below -> on the manifold
    double singular = 1e-8;     ///< second-smallest singular value at or below -> singular point

    [[nodiscard]] double on_threshold(Eigen::Index bonds) const {
        return on_manifold * static_cast<double>(bonds);
    }
};

enum class Regularity { off_manifold, regular, singular };

inline const char* to_string(Regularity r) {
    switch (r) {
    case Regularity::off_manifold: return "off_manifold";
    case Regularity::regular: return "regular";
    case Regularity::singular: return "singular";
    }
    return "?";
}

struct SecularValue {
    CVector z;
    Complex value;
    CVector gradient;
    Regularity regularity = Regularity::off_manifold;
    RVector singular_values; ///< of I - U(z), ascending
};

inline CMatrix identity_minus_U(const BondSystem& bs, const CVector& z) {
    CMatrix a = -evaluate_U(bs, z, TorusCheck::waive);
    a.diagonal().array() += 1.0;
    return a;
}

/// P(z) = det(I - U(z)), defined on all of C^N.
inline Complex secular_value(const BondSystem& bs, const CVector& z) {
    return identity_minus_U(bs, z).partialPivLu().determinant();
}

/// det(I - U(z)) and adj(I - U(z)) from one Faddeev-LeVerrier pass.
inline DetAdj secular_det_adj(const BondSystem& bs, const CVector& z) {
    return faddeev_leverrier(identity_minus_U(bs, z));
}

namespace detail {

// dP/dz_j = Tr[adj(I-U) d(I-U)/dz_j] = -[(S adj)_{jj} + (S adj)_{N+j,N+j}]
inline CVector gradient_from_adj(const BondSystem& bs, const CMatrix& adj) {
    const auto n = static_cast<Eigen::Index>(bs.edge_count());
    const CMatrix sa = bs.S.cast<Complex>() * adj;
    CVector g(n);
    for (Eigen::Index j = 0; j < n; ++j) g[j] = -(sa(j, j) + sa(j + n, j + n));
    return g;
}

} // namespace detail

inline CVector secular_gradient(const BondSystem& bs, const CVector& z) {
    return detail::gradient_from_adj(bs, secular_det_adj(bs, z).adj);
}

/// Value, gradient and regular/singular classification at a torus point.
inline SecularValue evaluate_secular(const BondSystem& bs, const CVector& z,
                                     const ManifoldTolerances& tol = {}) {
    const CMatrix a = identity_minus_U(bs, z);
    const DetAdj da = faddeev_leverrier(a);
    SecularValue out;
    out.z = z;
    out.value = a.partialPivLu().determinant();
    out.gradient = detail::gradient_from_adj(bs, da.adj);
    out.singular_values = singular_values_ascending(a);
    const double on = tol.on_threshold(a.rows());
    if (out.singular_values[0] > on) {
        out.regularity = Regularity::off_manifold;
    } else if (out.singular_values.size() > 1 && out.singular_values[1] <= tol.singular) {
        out.regularity = Regularity::singular;
    } else {
        out.regularity = Regularity::regular;
    }
    return out;
}

/// A(z) = M adj(I - U(z)) M^*. Polynomial entries; rank one on the regular part, zero on the singular part.
inline CMatrix rank_one_A(const BondSystem& bs, const CVector& z) {
    return bs.M * secular_det_adj(bs, z).adj * bs.M.adjoint();
}

/// Symmetric and antisymmetric mandarin factors (P_s, P_as).
inline std::pair<Complex, Complex> mandarin_factors(const CVector& z) {
    const Eigen::Index n = z.size();
    if (n < 3) throw ValidationError("mandarin requires at least 3 edges");
    Complex ps{0.0, 0.0};
    Complex pas{0.0, 0.0};
    for (Eigen::Index j = 0; j < n; ++j) {
        Complex prod_plus{1.0, 0.0};
        Complex prod_minus{1.0, 0.0};
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i == j) continue;
            prod_plus *= z[i] + 1.0;
            prod_minus *= z[i] - 1.0;
        }
        ps += (z[j] - 1.0) * prod_plus;
        pas += (z[j] + 1.0) * prod_minus;
    }
    return {ps, pas};
}

/**
 * Polynomial of degree <= 2 in each of N variables, stored densely over
 * multi-degrees d in {0,1,2}^N. Index of d is sum_j d_j 3^j.
 */
class PolyTable {
public:
    explicit PolyTable(std::size_t n) : n_(n), coeffs_(power3(n), Complex{0.0, 0.0}) {}

    static constexpr std::size_t max_variables = 10;

    [[nodiscard]] std::size_t variables() const noexcept { return n_; }
    [[nodiscard]] std::size_t size() const noexcept { return coeffs_.size(); }

    [[nodiscard]] Complex& operator[](std::size_t index) { return coeffs_[index]; }
    [[nodiscard]] const Complex& operator[](std::size_t index) const { return coeffs_[index]; }

    [[nodiscard]] std::vector<int> degrees(std::size_t index) const {
        std::vector<int> d(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            d[j] = static_cast<int>(index % 3);
            index /= 3;
        }
        return d;
    }

    [[nodiscard]] std::size_t index(const std::vector<int>& d) const {
        if (d.size() != n_) throw ValidationError("multi-degree has the wrong length");
        std::size_t idx = 0;
        for (std::size_t j = n_; j-- > 0;) {
            if (d[j] < 0 || d[j] > 2) throw ValidationError("multi-degree entry outside 0..2");
            idx = idx * 3 + static_cast<std::size_t>(d[j]);
        }
        return idx;
    }

    [[nodiscard]] Complex coefficient(const std::vector<int>& d) const { return coeffs_[index(d)]; }

    [[nodiscard]] Complex evaluate(const CVector& z) const {
        if (static_cast<std::size_t>(z.size()) != n_) throw ValidationError("point has the wrong dimension");
        // Nested Horner over the base-3 layout, variable 0 innermost.
        std::vector<Complex> level(coeffs_);
        std::size_t len = coeffs_.size();
        for (std::size_t j = 0; j < n_; ++j) {
            len /= 3;
            for (std::size_t i = 0; i < len; ++i) {
                const Complex c0 = level[3 * i];
                const Complex c1 = level[3 * i + 1];
                const Complex c2 = level[3 * i + 2];
                level[i] = c0 + z[static_cast<Eigen::Index>(j)] * (c1 + z[static_cast<Eigen::Index>(j)] * c2);
            }
        }
        return level[0];
    }

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (const auto& c : coeffs_) m = std::max(m, std::abs(c));
        return m;
    }

    static std::size_t power3(std::size_t n) {
        std::size_t p = 1;
        for (std::size_t j = 0; j < n; ++j) p *= 3;
        return p;
    }

private:
    std::size_t n_;
    std::vector<Complex> coeffs_;
};

/**
 * Recovers the coefficients of a function known to be a polynomial of degree
 * <= 2 per variable, by sampling on the tensor grid of cube roots of unity
 * and inverting the N-dimensional discrete Fourier transform. Exact up to
 * rounding for such polynomials.
 */
inline PolyTable interpolate_degree2(std::size_t n, const std::function<Complex(const CVector&)>& f) {
    if (n > PolyTable::max_variables) throw ValidationError("expansion guard exceeded");
    const std::array<Complex, 3> omega{Complex{1.0, 0.0}, std::polar(1.0, two_pi / 3.0),
                                       std::polar(1.0, 2.0 * two_pi / 3.0)};
    PolyTable table(n);
    const std::size_t total = table.size();
    std::vector<Complex> samples(total);
    CVector z(static_cast<Eigen::Index>(n));
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rest = idx;
        for (std::size_t j = 0; j < n; ++j) {
            z[static_cast<Eigen::Index>(j)] = omega[rest % 3];
            rest /= 3;
        }
        samples[idx] = f(z);
    }
    // Separable inverse DFT, one axis at a time: c_d = (1/3) sum_m s_m omega^{-m d}.
    std::size_t stride = 1;
    std::vector<Complex> tmp(3);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t base = 0; base < total; ++base) {
            if ((base / stride) % 3 != 0) continue;
            for (std::size_t d = 0; d < 3; ++d) {
                Complex acc{0.0, 0.0};
                for (std::size_t m = 0; m < 3; ++m) {
                    acc += samples[base + m * stride] * std::conj(omega[(m * d) % 3]);
                }
                tmp[d] = acc / 3.0;
            }
            for (std::size_t d = 0; d < 3; ++d) samples[base + d * stride] = tmp[d];
        }
        stride *= 3;
    }
    for (std::size_t idx = 0; idx < total; ++idx) table[idx] = samples[idx];
    return table;
}

inline PolyTable expand_polynomial(const BondSystem& bs) {
    return interpolate_degree2(bs.edge_count(), [&](const CVector& z) { return secular_value(bs, z); });
}

struct PolyDivision {
    PolyTable quotient;  ///< degree <= 1 in the divided variable
    PolyTable remainder; ///< independent of the divided variable
};

/// Division by (1 - z_j) in variable j. The remainder equals the table at z_j = 1.
inline PolyDivision divide_by_one_minus(const PolyTable& p, std::size_t j) {
    const std::size_t n = p.variables();
    if (j >= n) throw ValidationError("division variable out of range");
    PolyTable q(n);
    PolyTable r(n);
    const std::size_t stride = PolyTable::power3(j);
    for (std::size_t base = 0; base < p.size(); ++base) {
        if ((base / stride) % 3 != 0) continue;
        const Complex p0 = p[base];
        const Complex p1 = p[base + stride];
        const Complex p2 = p[base + 2 * stride];
        // (1 - z)(q0 + q1 z) + r = q0 + (q1 - q0) z - q1 z^2 + r
        const Complex q1 = -p2;
        const Complex q0 = q1 - p1;
        q[base] = q0;
        q[base + stride] = q1;
        r[base] = p0 - q0;
    }
    return {std::move(q), std::move(r)};
}

struct LoopDivision {
    std::size_t edge = 0;
    double remainder_norm = 0.0; ///< max |coefficient| of the remainder
};

struct FactorizationReport {
    std::size_t edge_count = 0;
    std::size_t sample_points = 0;
    std::vector<LoopDivision> loop_divisions;
    std::optional<Complex> mandarin_constant; ///< c in P = c P_s P_as, fitted at z = 0
    std::optional<double> mandarin_max_deviation;
    std::optional<Complex> flower_constant;   ///< c' in P_sym = c' P_s, fitted at z = 0
    std::optional<double> flower_max_deviation;
};

namespace detail {

inline CVector random_torus_point(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> phase(0.0, two_pi);
    CVector z(n);
    for (Eigen::Index j = 0; j < n; ++j) z[j] = std::polar(1.0, phase(rng));
    return z;
}

} // namespace detail

/// P_sym: the secular table with every loop factor (1 - z_j) divided out.
inline PolyDivision symmetric_part(const PolyTable& p, const std::vector<std::size_t>& loops) {
    PolyTable q = p;
    PolyTable worst_remainder(p.variables());
    double worst = -1.0;
    for (const auto j : loops) {
        auto div = divide_by_one_minus(q, j);
        if (div.remainder.max_abs() > worst) {
            worst = div.remainder.max_abs();
            worst_remainder = div.remainder;
        }
        q = std::move(div.quotient);
    }
    return {std::move(q), std::move(worst_remainder)};
}

inline FactorizationReport verify_factorization(const MetricGraph& g, std::size_t samples = 10000,
                                                std::uint64_t seed = 1) {
    const GraphClass cls = classify(g);
    require_assumption(cls);
    const BondSystem bs = build_bond_scattering(g);
    const auto n = static_cast<Eigen::Index>(g.edge_count());
    FactorizationReport rep;
    rep.edge_count = g.edge_count();
    rep.sample_points = samples;
    std::mt19937_64 rng(seed);

    if (cls.has_loops()) {
        const PolyTable p = expand_polynomial(bs);
        for (const auto j : cls.loop_edges) {
            rep.loop_divisions.push_back({j, divide_by_one_minus(p, j).remainder.max_abs()});
        }
        if (cls.is_flower && n >= 3) {
            const PolyTable sym = symmetric_part(p, cls.loop_edges).quotient;
            const CVector zero = CVector::Zero(n);
            const Complex c = sym.evaluate(zero) / mandarin_factors(zero).first;
            double worst = 0.0;
            for (std::size_t s = 0; s < samples; ++s) {
                const CVector z = detail::random_torus_point(rng, n);
                worst = std::max(worst, std::abs(sym.evaluate(z) / (c * mandarin_factors(z).first) - 1.0));
            }
            rep.flower_constant = c;
            rep.flower_max_deviation = worst;
        }
    }
    if (cls.is_mandarin && n >= 3) {
        const CVector zero = CVector::Zero(n);
        const auto f0 = mandarin_factors(zero);
        const Complex c = secular_value(bs, zero) / (f0.first * f0.second);
        double worst = 0.0;
        for (std::size_t s = 0; s < samples; ++s) {
            const CVector z = detail::random_torus_point(rng, n);
            const auto f = mandarin_factors(z);
            worst = std::max(worst, std::abs(secular_value(bs, z) / (c * f.first * f.second) - 1.0));
        }
        rep.mandarin_constant = c;
        rep.mandarin_max_deviation = worst;
    }
    return rep;
}

namespace detail {

inline std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v + 0.0);
    return buf;
}

} // namespace detail

/**
 * Text export: one line per coefficient with |c| > drop_below,
 * "(d_1,...,d_N) re im", 17 significant digits, ascending index order.
 */
inline std::string export_poly_table(const PolyTable& p, double drop_below = 1e-13) {
    std::string out = "# secular polynomial coefficients\n# variables " + std::to_string(p.variables()) +
                      "\n# dropped |c| <= " + detail::format17(drop_below) + "\n";
    for (std::size_t idx = 0; idx < p.size(); ++idx) {
        if (std::abs(p[idx]) <= drop_below) continue;
        const auto d = p.degrees(idx);
        std::string key = "(";
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (j) key += ",";
            key += std::to_string(d[j]);
        }
        key += ")";
        out += key + " " + detail::format17(p[idx].real()) + " " + detail::format17(p[idx].imag()) + "\n";
    }
    return out;
}

inline std::string format_report(const FactorizationReport& r) {
    std::string out = "edges " + std::to_string(r.edge_count) + "\n";
    out += "sample_points " + std::to_string(r.sample_points) + "\n";
    for (const auto& d : r.loop_divisions) {
        out += "loop_factor_remainder edge=" + std::to_string(d.edge) + " " +
               detail::format17(d.remainder_norm) + "\n";
    }
    if (r.mandarin_constant) {
        out += "mandarin_constant " + detail::format17(r.mandarin_constant->real()) + " " +
               detail::format17(r.mandarin_constant->imag()) + "\n";
        out += "mandarin_max_deviation " + detail::format17(*r.mandarin_max_deviation) + "\n";
    }
    if (r.flower_constant) {
        out += "flower_constant " + detail::format17(r.flower_constant->real()) + " " +
               detail::format17(r.flower_constant->imag()) + "\n";
        out += "flower_max_deviation " + detail::format17(*r.flower_max_deviation) + "\n";
    }
    return out;
}

} // namespace qgraph
