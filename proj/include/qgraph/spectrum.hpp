#pragma once

#include "qgraph/error.hpp"
#include "qgraph/linalg.hpp"
#include "qgraph/scattering.hpp"
#include "qgraph/secular.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <string>
#include <thread>
#include <vector>

namespace qgraph {

struct EigenvalueRecord {
    double k = 0.0;
    int multiplicity = 0;
    std::vector<CVector> kernel_basis; ///< orthonormal basis of ker(I - U(exp(i k l)))
    double residual = 0.0;             ///< smallest singular value of I - U at k
};

struct SpectrumWindow {
    RVector lengths;
    double k_min = 0.0;
    double k_max = 0.0;
    std::vector<EigenvalueRecord> records;
    std::size_t total_count = 0; ///< with multiplicity
};

struct SolverOptions {
    ManifoldTolerances tolerances;
    double expected_count_cap = 1e6; ///< guard on (L/pi)(k_max - k_min)
    double root_width = 1e-12;       ///< bisection stops below this bracket width
    double merge_distance = 1e-9;    ///< roots closer than this form one cluster
    double step_fraction = 1.0;      ///< grid step is step_fraction * (pi/2) / max l
    unsigned threads = 0;            ///< 0: hardware concurrency
};

/// Eigenphases of U(exp(i k l)) in [0, 2 pi), ascending.
inline std::vector<double> eigenphases(const BondSystem& bs, const RVector& lengths, double k) {
    if (!(k > 0.0)) throw ValidationError("eigenphases need k > 0");
    const CMatrix u = evaluate_U(bs, torus_point(lengths, k), TorusCheck::waive);
    Eigen::ComplexEigenSolver<CMatrix> es(u, false);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(u.rows()));
    for (Eigen::Index m = 0; m < u.rows(); ++m) out.push_back(wrap_phase(std::arg(es.eigenvalues()[m])));
    std::sort(out.begin(), out.end());
    return out;
}

struct KernelInfo {
    int dimension = 0;
    CMatrix basis;           ///< 2N x dimension, orthonormal columns
    RVector singular_values; ///< of I - U(z), ascending
};

/**
 * Dimension of ker(I - U(z)) by singular-value thresholding. A singular value
 * falling between the on-manifold threshold and the singular-point threshold
 * makes the decision ambiguous and raises NumericalError.
 */
inline KernelInfo multiplicity(const BondSystem& bs, const CVector& z, const ManifoldTolerances& tol = {}) {
    const CMatrix a = identity_minus_U(bs, z);
    Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullV);
    const RVector sv = svd.singularValues(); // descending
    const Eigen::Index b = sv.size();
    const double on = tol.on_threshold(b);
    KernelInfo info;
    info.singular_values = sv.reverse();
    for (Eigen::Index i = 0; i < b; ++i) {
        if (sv[i] > on && sv[i] <= tol.singular) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "rank decision ambiguous: singular value %.3e lies in (%.3e, %.3e]", sv[i], on,
                          tol.singular);
            throw NumericalError(buf);
        }
        if (sv[i] <= on) ++info.dimension;
    }
    info.basis = svd.matrixV().rightCols(info.dimension);
    return info;
}

namespace detail {

/// Sum of eigenphases in [0, 2 pi). Crossings of phase 0 in (a, b] equal
/// (2 L (b - a) - Sigma(b) + Sigma(a)) / (2 pi) because det U(k) = exp(2 i k L) det S.
inline double phase_sum(const BondSystem& bs, const RVector& lengths, double k) {
    double s = 0.0;
    for (const double p : eigenphases(bs, lengths, k)) s += p;
    return s;
}

inline int crossings(double total_length, double a, double sa, double b, double sb) {
    const double raw = (2.0 * total_length * (b - a) - sb + sa) / two_pi;
    const double r = std::round(raw);
    if (std::abs(raw - r) > 0.25) {
        throw NumericalError("eigenphase count is not integral (" + std::to_string(raw) + ")");
    }
    return static_cast<int>(r);
}

struct RootCandidate {
    double k;
    int crossings;
};

struct Bracket {
    double a, sa, b, sb;
    int count;
};

inline void refine(const BondSystem& bs, const RVector& lengths, double total_length, const SolverOptions& opt,
                   Bracket top, std::vector<RootCandidate>& out) {
    std::vector<Bracket> stack{top};
    while (!stack.empty()) {
        const Bracket br = stack.back();
        stack.pop_back();
        if (br.count <= 0) continue;
        const double width_tol = std::max(opt.root_width, 16.0 * std::numeric_limits<double>::epsilon() * br.b);
        if (br.b - br.a <= width_tol) {
            out.push_back({0.5 * (br.a + br.b), br.count});
            continue;
        }
        const double mid = 0.5 * (br.a + br.b);
        const double sm = phase_sum(bs, lengths, mid);
        const int left = std::clamp(crossings(total_length, br.a, br.sa, mid, sm), 0, br.count);
        // Right half pushed first so the left half is processed first.
        stack.push_back({mid, sm, br.b, br.sb, br.count - left});
        stack.push_back({br.a, br.sa, mid, sm, left});
    }
}

inline std::vector<RootCandidate> scan_chunk(const BondSystem& bs, const RVector& lengths, double total_length,
                                             const SolverOptions& opt, const std::vector<double>& grid,
                                             std::size_t first, std::size_t last) {
    std::vector<RootCandidate> out;
    double a = grid[first];
    double sa = phase_sum(bs, lengths, a);
    for (std::size_t i = first + 1; i <= last; ++i) {
        const double b = grid[i];
        const double sb = phase_sum(bs, lengths, b);
        const int c = crossings(total_length, a, sa, b, sb);
        if (c < 0) throw NumericalError("negative eigenphase crossing count");
        if (c > 0) refine(bs, lengths, total_length, opt, {a, sa, b, sb, c}, out);
        a = b;
        sa = sb;
    }
    return out;
}

} // namespace detail

/**
 * All k in (k_min, k_max] with exp(i k l) on the secular manifold.
 *
 * The eigenphases of U(exp(i k l)) rotate counter-clockwise with speeds in
 * [min l, max l]. Crossings of phase 0 are counted exactly per grid interval
 * from the phase sum, located by bisection, clustered, and each cluster's
 * multiplicity is taken from the kernel dimension at the merged k.
 */
inline SpectrumWindow solve_spectrum(const BondSystem& bs, const RVector& lengths, double k_min, double k_max,
                                     const SolverOptions& opt = {}) {
    if (lengths.size() != static_cast<Eigen::Index>(bs.edge_count())) {
        throw ValidationError("length vector has the wrong dimension");
    }
    if (!(k_min > 0.0) || !(k_max > k_min)) throw ValidationError("window must satisfy 0 < k_min < k_max");
    const double total_length = lengths.sum();
    const double expected = total_length / std::numbers::pi * (k_max - k_min);
    if (expected > opt.expected_count_cap) {
        throw ValidationError("window too large: about " + std::to_string(static_cast<long long>(expected)) +
                              " eigenvalues expected, cap is " +
                              std::to_string(static_cast<long long>(opt.expected_count_cap)));
    }

    const double step = opt.step_fraction * (std::numbers::pi / 2.0) / lengths.maxCoeff();
    std::vector<double> grid;
    const auto intervals = static_cast<std::size_t>(std::ceil((k_max - k_min) / step));
    grid.reserve(intervals + 1);
    for (std::size_t i = 0; i < intervals; ++i) grid.push_back(k_min + static_cast<double>(i) * step);
    grid.push_back(k_max);

    unsigned workers = opt.threads != 0 ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, grid.size() - 1));
    std::vector<detail::RootCandidate> candidates;
    if (workers <= 1) {
        candidates = detail::scan_chunk(bs, lengths, total_length, opt, grid, 0, grid.size() - 1);
    } else {
        // Chunks share their boundary grid points; results are concatenated in window order.
        std::vector<std::future<std::vector<detail::RootCandidate>>> jobs;
        const std::size_t n_int = grid.size() - 1;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t first = n_int * w / workers;
            const std::size_t last = n_int * (w + 1) / workers;
            jobs.push_back(std::async(std::launch::async, [&, first, last] {
                return detail::scan_chunk(bs, lengths, total_length, opt, grid, first, last);
            }));
        }
        for (auto& j : jobs) {
            auto part = j.get();
            candidates.insert(candidates.end(), part.begin(), part.end());
        }
    }

    SpectrumWindow win;
    win.lengths = lengths;
    win.k_min = k_min;
    win.k_max = k_max;
    std::size_t i = 0;
    while (i < candidates.size()) {
        std::size_t j = i + 1;
        double weighted = candidates[i].k * candidates[i].crossings;
        int count = candidates[i].crossings;
        while (j < candidates.size() && candidates[j].k - candidates[j - 1].k < opt.merge_distance) {
            weighted += candidates[j].k * candidates[j].crossings;
            count += candidates[j].crossings;
            ++j;
        }
        EigenvalueRecord rec;
        rec.k = weighted / count;
        const KernelInfo ker = multiplicity(bs, torus_point(lengths, rec.k), opt.tolerances);
        if (ker.dimension != count) {
            char buf[200];
            std::snprintf(buf, sizeof buf,
                          "rank decision ambiguous at k=%.15g: %d phase crossings but kernel dimension %d "
                          "(smallest singular value %.3e)",
                          rec.k, count, ker.dimension, ker.singular_values[0]);
            throw NumericalError(buf);
        }
        rec.multiplicity = ker.dimension;
        rec.residual = ker.singular_values[0];
        for (Eigen::Index c = 0; c < ker.basis.cols(); ++c) rec.kernel_basis.emplace_back(ker.basis.col(c));
        win.total_count += static_cast<std::size_t>(rec.multiplicity);
        win.records.push_back(std::move(rec));
        i = j;
    }
    return win;
}

/// Eigenvalue counting against (L / pi) k_max.
struct WeylReport {
    std::size_t count = 0;
    double predicted = 0.0;
    double deviation = 0.0;
    bool flagged = false; ///< |deviation| > 2N
};

inline WeylReport weyl_check(const SpectrumWindow& w) {
    WeylReport r;
    r.count = w.total_count;
    r.predicted = w.lengths.sum() / std::numbers::pi * w.k_max;
    r.deviation = static_cast<double>(r.count) - r.predicted;
    r.flagged = std::abs(r.deviation) > 2.0 * static_cast<double>(w.lengths.size());
    return r;
}

/// "k,multiplicity,residual" rows, k with 15 significant digits, ascending.
inline std::string export_spectrum_csv(const SpectrumWindow& w) {
    std::string out = "k,multiplicity,residual\n";
    char buf[96];
    for (const auto& r : w.records) {
        std::snprintf(buf, sizeof buf, "%.15g,%d,%.6e\n", r.k, r.multiplicity, r.residual);
        out += buf;
    }
    return out;
}

inline std::string format_weyl(const WeylReport& r) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "weyl count=%zu predicted=%.6f deviation=%.6f flagged=%s\n", r.count,
                  r.predicted, r.deviation, r.flagged ? "true" : "false");
    return buf;
}

} // namespace qgraph
