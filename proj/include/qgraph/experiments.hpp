#pragma once

#include "qgraph/error.hpp"
#include "qgraph/graph_model.hpp"
#include "qgraph/linalg.hpp"
#include "qgraph/scattering.hpp"
#include "qgraph/spectrum.hpp"
#include "qgraph/trace_space.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace qgraph {

inline constexpr const char* tool_version = "0.1.0";

namespace detail {

/// True if some ratio l_i / l_j lies within 1e-9 of p/q with p, q <= 50.
inline bool has_small_rational_ratio(const RVector& l) {
    for (Eigen::Index i = 0; i < l.size(); ++i) {
        for (Eigen::Index j = 0; j < l.size(); ++j) {
            if (i == j) continue;
            const double r = l[i] / l[j];
            for (int q = 1; q <= 50; ++q) {
                const double p = std::round(r * q);
                if (p >= 1.0 && p <= 50.0 && std::abs(r - p / q) <= 1e-9) return true;
            }
        }
    }
    return false;
}

} // namespace detail

/// n uniform draws in [a, b], redrawn while any pairwise ratio is a small rational.
inline RVector random_lengths(std::size_t n, std::uint64_t seed, double a = 1.0, double b = 2.0) {
    if (n == 0) throw ValidationError("need at least one length");
    if (!(a > 0.0) || !(b > a) || !std::isfinite(b)) throw ValidationError("length range must satisfy 0 < a < b");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(a, b);
    RVector l(static_cast<Eigen::Index>(n));
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (Eigen::Index j = 0; j < l.size(); ++j) l[j] = dist(rng);
        if (!detail::has_small_rational_ratio(l)) return l;
    }
    throw NumericalError("could not draw rationally independent lengths");
}

/// Score-interval bounds for a binomial fraction at 95%.
struct WilsonInterval {
    double low = 0.0;
    double high = 1.0;
};

inline WilsonInterval wilson_interval(std::size_t hits, std::size_t total, double zscore = 1.959963984540054) {
    if (total == 0) return {};
    const double n = static_cast<double>(total);
    const double p = static_cast<double>(hits) / n;
    const double z2 = zscore * zscore;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = zscore * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

enum class Property { simple, nonvanishing, loop_supported };

inline const char* to_string(Property p) {
    switch (p) {
    case Property::simple: return "simple";
    case Property::nonvanishing: return "nonvanishing";
    case Property::loop_supported: return "loop_supported";
    }
    return "?";
}

inline Property parse_property(const std::string& s) {
    if (s == "simple") return Property::simple;
    if (s == "nonvanishing") return Property::nonvanishing;
    if (s == "loop_supported") return Property::loop_supported;
    throw ValidationError("unknown property '" + s + "'");
}

struct MatchedPair {
    double k1;
    double k2;
};

/**
 * Outcome of a density experiment. `count` is the number of failing
 * eigenvalues (simple, nonvanishing), occurring ones (loop_supported) or
 * matched ones (common spectrum), all counted with multiplicity.
 */
struct DensityReport {
    std::string experiment;
    std::string property;
    std::vector<std::string> graphs;
    RVector lengths;
    std::uint64_t seed = 0;
    double k_min = 0.0;
    double k_max = 0.0;
    std::size_t total = 0;
    std::size_t count = 0;
    double fraction = 0.0;
    WilsonInterval interval;
    std::vector<double> offenders; ///< k values behind `count`, capped
    std::vector<MatchedPair> matched;
    nlohmann::json config;         ///< echoed verbatim into the export
};

inline constexpr std::size_t offender_cap = 50;

/// Lower window edge below the first nonzero eigenvalue, which is at least pi / L.
inline double default_k_min(const RVector& lengths) {
    return 0.5 * std::numbers::pi / lengths.sum();
}

namespace detail {

inline void finish(DensityReport& r) {
    r.fraction = r.total == 0 ? 0.0 : static_cast<double>(r.count) / static_cast<double>(r.total);
    r.interval = wilson_interval(r.count, r.total);
}

inline void note_offender(DensityReport& r, double k) {
    if (r.offenders.size() < offender_cap) r.offenders.push_back(k);
}

inline bool loop_supported_anywhere(const GraphClass& cls, const std::vector<TraceVector>& traces) {
    for (const auto& t : traces) {
        for (const auto j : cls.loop_edges) {
            if (is_loop_supported(t, j)) return true;
        }
    }
    return false;
}

} // namespace detail

/**
 * Fraction of eigenvalues in (k_min, k_max] failing `simple` / `nonvanishing`,
 * or having the property for `loop_supported`.
 */
inline DensityReport genericity_density(const MetricGraph& g, Property property, const RVector& lengths,
                                        double k_max, const SolverOptions& opt = {}, double k_min = 0.0) {
    const GraphClass cls = classify(g);
    require_assumption(cls);
    const MetricGraph gl = g.with_lengths(lengths);
    const BondSystem bs = build_bond_scattering(gl);
    if (k_min <= 0.0) k_min = default_k_min(lengths);
    const SpectrumWindow w = solve_spectrum(bs, lengths, k_min, k_max, opt);

    DensityReport r;
    r.experiment = "genericity_density";
    r.property = to_string(property);
    r.graphs.push_back(graph_to_json(gl).dump());
    r.lengths = lengths;
    r.k_min = k_min;
    r.k_max = k_max;
    r.total = w.total_count;
    for (const auto& rec : w.records) {
        const auto m = static_cast<std::size_t>(rec.multiplicity);
        bool hit = false;
        switch (property) {
        case Property::simple: hit = rec.multiplicity != 1; break;
        case Property::nonvanishing: {
            const auto traces = kernel_traces(bs, torus_point(lengths, rec.k), opt.tolerances);
            for (const auto& t : traces) hit = hit || !nonvanishing_test(gl, t).nonvanishing;
            break;
        }
        case Property::loop_supported: {
            const auto traces = kernel_traces(bs, torus_point(lengths, rec.k), opt.tolerances);
            hit = detail::loop_supported_anywhere(cls, traces);
            break;
        }
        }
        if (hit) {
            r.count += property == Property::loop_supported ? 1 : m;
            detail::note_offender(r, rec.k);
        }
    }
    detail::finish(r);
    return r;
}

/// Default matching band 1e-8 (1 + k).
struct MatchTolerance {
    double scale = 1e-8;
    [[nodiscard]] double at(double k) const { return scale * (1.0 + k); }
};

/// Sorted eigenvalues repeated by multiplicity.
inline std::vector<double> expand_multiplicities(const SpectrumWindow& w) {
    std::vector<double> out;
    out.reserve(w.total_count);
    for (const auto& r : w.records) out.insert(out.end(), static_cast<std::size_t>(r.multiplicity), r.k);
    return out;
}

/// Greedy two-pointer matching of sorted lists within tol(k).
inline std::vector<MatchedPair> match_spectra(const std::vector<double>& a, const std::vector<double>& b,
                                              const MatchTolerance& tol) {
    std::vector<MatchedPair> out;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const double band = tol.at(std::max(a[i], b[j]));
        if (std::abs(a[i] - b[j]) <= band) {
            out.push_back({a[i], b[j]});
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return out;
}

/// Eigenvalues shared by two graphs with the same edge lengths; fraction relative to the first spectrum.
inline DensityReport common_spectrum(const MetricGraph& g1, const MetricGraph& g2, const RVector& lengths,
                                     double k_max, const MatchTolerance& tol = {}, const SolverOptions& opt = {},
                                     double k_min = 0.0) {
    if (g1.edge_count() != g2.edge_count()) throw ValidationError("edge-count mismatch between the two graphs");
    require_assumption(classify(g1));
    require_assumption(classify(g2));
    const MetricGraph a = g1.with_lengths(lengths);
    const MetricGraph b = g2.with_lengths(lengths);
    if (k_min <= 0.0) k_min = default_k_min(lengths);
    const SpectrumWindow w1 = solve_spectrum(build_bond_scattering(a), lengths, k_min, k_max, opt);
    const SpectrumWindow w2 = solve_spectrum(build_bond_scattering(b), lengths, k_min, k_max, opt);

    DensityReport r;
    r.experiment = "common_spectrum";
    r.property = "matched";
    r.graphs = {graph_to_json(a).dump(), graph_to_json(b).dump()};
    r.lengths = lengths;
    r.k_min = k_min;
    r.k_max = k_max;
    r.total = w1.total_count;
    r.matched = match_spectra(expand_multiplicities(w1), expand_multiplicities(w2), tol);
    r.count = r.matched.size();
    for (const auto& m : r.matched) detail::note_offender(r, m.k1);
    detail::finish(r);
    return r;
}

/// Structured export: every report field, the tool version and the configuration echo.
inline nlohmann::json report_to_json(const DensityReport& r) {
    nlohmann::json doc;
    doc["tool_version"] = tool_version;
    doc["experiment"] = r.experiment;
    doc["property"] = r.property;
    doc["graphs"] = nlohmann::json::array();
    for (const auto& g : r.graphs) doc["graphs"].push_back(nlohmann::json::parse(g));
    doc["lengths"] = std::vector<double>(r.lengths.data(), r.lengths.data() + r.lengths.size());
    doc["seed"] = r.seed;
    doc["window"] = {{"k_min", r.k_min}, {"k_max", r.k_max}};
    doc["total_eigenvalues"] = r.total;
    doc["count"] = r.count;
    doc["fraction"] = r.fraction;
    doc["wilson_95"] = {r.interval.low, r.interval.high};
    doc["offenders"] = r.offenders;
    doc["offenders_capped_at"] = offender_cap;
    doc["config"] = r.config.is_null() ? nlohmann::json::object() : r.config;
    return doc;
}

inline std::string export_report(const DensityReport& r) { return report_to_json(r).dump(2) + "\n"; }

} // namespace qgraph
