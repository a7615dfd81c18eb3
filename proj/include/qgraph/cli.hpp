#pragma once

#include "qgraph/error.hpp"
#include "qgraph/experiments.hpp"
#include "qgraph/graph_model.hpp"
#include "qgraph/scattering.hpp"
#include "qgraph/secular.hpp"
#include "qgraph/spectrum.hpp"
#include "qgraph/trace_space.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qgraph::cli {

/// Everything a run depends on. Echoed into report outputs.
struct RunConfig {
    std::string command;
    std::vector<std::string> graph_paths;
    std::string lengths_path;
    double k_min = 0.0; ///< 0: just below the first nonzero eigenvalue
    double k_max = 20.0;
    std::uint64_t seed = 1;
    double range_low = 1.0;
    double range_high = 2.0;
    double tol_onmanifold = ManifoldTolerances{}.on_manifold;
    double tol_singular = ManifoldTolerances{}.singular;
    double tol_match = MatchTolerance{}.scale;
    double root_width = SolverOptions{}.root_width;
    double merge_distance = SolverOptions{}.merge_distance;
    unsigned threads = 0;
    std::size_t samples = 10000;
    std::optional<double> k;
    std::optional<std::size_t> index;
    std::string property = "simple";
    std::string out;
    std::string format = "csv";

    [[nodiscard]] SolverOptions solver_options() const {
        SolverOptions o;
        o.tolerances.on_manifold = tol_onmanifold;
        o.tolerances.singular = tol_singular;
        o.root_width = root_width;
        o.merge_distance = merge_distance;
        o.threads = threads;
        return o;
    }

    [[nodiscard]] nlohmann::json echo() const {
        nlohmann::json j;
        j["command"] = command;
        j["graphs"] = graph_paths;
        j["lengths_file"] = lengths_path;
        j["k_min"] = k_min;
        j["k_max"] = k_max;
        j["seed"] = seed;
        j["length_range"] = {range_low, range_high};
        j["tol_onmanifold"] = tol_onmanifold;
        j["tol_singular"] = tol_singular;
        j["tol_match"] = tol_match;
        j["root_width"] = root_width;
        j["merge_distance"] = merge_distance;
        j["samples"] = samples;
        if (k) j["k"] = *k;
        if (index) j["index"] = *index;
        j["property"] = property;
        j["format"] = format;
        return j;
    }
};

/// Lengths file: a JSON list of positive numbers in edge-id order.
inline RVector read_lengths(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open lengths file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("parse failure in lengths file: ") + e.what());
    }
    if (!doc.is_array() || doc.empty()) throw ValidationError("lengths file must hold a non-empty list");
    RVector l(static_cast<Eigen::Index>(doc.size()));
    for (std::size_t j = 0; j < doc.size(); ++j) {
        if (!doc[j].is_number()) throw ValidationError("lengths file entries must be numbers");
        l[static_cast<Eigen::Index>(j)] = doc[j].get<double>();
    }
    return l;
}

namespace detail {

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) throw ValidationError("cannot write '" + cfg.out + "'");
    f << text;
}

inline MetricGraph load_with_lengths(const RunConfig& cfg, std::size_t which) {
    MetricGraph g = load_graph_file(cfg.graph_paths.at(which));
    if (!cfg.lengths_path.empty()) {
        const RVector l = read_lengths(cfg.lengths_path);
        if (static_cast<std::size_t>(l.size()) != g.edge_count()) {
            throw ValidationError("lengths file has the wrong number of entries");
        }
        g = g.with_lengths(l);
    }
    return g;
}

/// Lengths for experiments: the lengths file if given, otherwise seeded random draws.
inline RVector experiment_lengths(const RunConfig& cfg, std::size_t n) {
    if (!cfg.lengths_path.empty()) {
        RVector l = read_lengths(cfg.lengths_path);
        if (static_cast<std::size_t>(l.size()) != n) throw ValidationError("lengths file has the wrong number of entries");
        return l;
    }
    return random_lengths(n, cfg.seed, cfg.range_low, cfg.range_high);
}

inline double window_min(const RunConfig& cfg, const RVector& l) {
    return cfg.k_min > 0.0 ? cfg.k_min : default_k_min(l);
}

inline std::string run_solve(const RunConfig& cfg, std::ostream& info) {
    const MetricGraph g = load_with_lengths(cfg, 0);
    require_assumption(classify(g));
    const RVector l = g.length_vector();
    const SpectrumWindow w =
        solve_spectrum(build_bond_scattering(g), l, window_min(cfg, l), cfg.k_max, cfg.solver_options());
    const std::string weyl = format_weyl(weyl_check(w));
    if (cfg.format == "report") {
        return "config " + cfg.echo().dump() + "\n" + weyl + export_spectrum_csv(w);
    }
    info << weyl;
    return export_spectrum_csv(w);
}

inline std::string run_trace(const RunConfig& cfg) {
    const MetricGraph g = load_with_lengths(cfg, 0);
    require_assumption(classify(g));
    const BondSystem bs = build_bond_scattering(g);
    const RVector l = g.length_vector();
    if (cfg.k.has_value() == cfg.index.has_value()) throw ValidationError("give exactly one of --k and --index");
    double k = 0.0;
    if (cfg.k) {
        k = *cfg.k;
        if (!(k > 0.0)) throw ValidationError("--k must be positive");
    } else {
        if (*cfg.index == 0) throw ValidationError("--index counts from 1");
        const SpectrumWindow w = solve_spectrum(bs, l, window_min(cfg, l), cfg.k_max, cfg.solver_options());
        std::size_t seen = 0;
        bool found = false;
        for (const auto& r : w.records) {
            seen += static_cast<std::size_t>(r.multiplicity);
            if (seen >= *cfg.index) {
                k = r.k;
                found = true;
                break;
            }
        }
        if (!found) throw ValidationError("window holds only " + std::to_string(seen) + " eigenvalues");
    }
    std::string out;
    for (const auto& t : kernel_traces(bs, torus_point(l, k), cfg.solver_options().tolerances)) {
        out += export_trace(t, k);
    }
    return out;
}

inline std::string run_verify_factor(const RunConfig& cfg) {
    const MetricGraph g = load_with_lengths(cfg, 0);
    const auto rep = verify_factorization(g, cfg.samples, cfg.seed);
    std::string out = format_report(rep);
    if (cfg.format == "report") out = "config " + cfg.echo().dump() + "\n" + out;
    return out;
}

inline std::string run_expand(const RunConfig& cfg) {
    const MetricGraph g = load_with_lengths(cfg, 0);
    return export_poly_table(expand_polynomial(build_bond_scattering(g)));
}

inline std::string run_density(const RunConfig& cfg) {
    const MetricGraph g = load_graph_file(cfg.graph_paths.at(0));
    const RVector l = experiment_lengths(cfg, g.edge_count());
    DensityReport r = genericity_density(g, parse_property(cfg.property), l, cfg.k_max, cfg.solver_options(),
                                         cfg.k_min);
    r.seed = cfg.seed;
    r.config = cfg.echo();
    return export_report(r);
}

inline std::string run_compare(const RunConfig& cfg) {
    const MetricGraph a = load_graph_file(cfg.graph_paths.at(0));
    const MetricGraph b = load_graph_file(cfg.graph_paths.at(1));
    if (a.edge_count() != b.edge_count()) throw ValidationError("edge-count mismatch between the two graphs");
    const RVector l = experiment_lengths(cfg, a.edge_count());
    DensityReport r = common_spectrum(a, b, l, cfg.k_max, MatchTolerance{cfg.tol_match}, cfg.solver_options(),
                                      cfg.k_min);
    r.seed = cfg.seed;
    r.config = cfg.echo();
    return export_report(r);
}

} // namespace detail

/// Executes a parsed configuration. Exit status 0 ok, 1 validation error, 2 numerical failure.
inline int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        std::string text;
        if (cfg.command == "solve") text = detail::run_solve(cfg, cfg.out.empty() ? err : out);
        else if (cfg.command == "trace") text = detail::run_trace(cfg);
        else if (cfg.command == "verify-factor") text = detail::run_verify_factor(cfg);
        else if (cfg.command == "expand") text = detail::run_expand(cfg);
        else if (cfg.command == "density") text = detail::run_density(cfg);
        else if (cfg.command == "compare") text = detail::run_compare(cfg);
        else throw ValidationError("unknown command '" + cfg.command + "'");
        detail::emit(cfg, text, out);
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::numerical ? 2 : 1;
    }
}

/// Parses argv and runs. --help prints usage and returns 0.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Quantum graph spectra, traces and secular-manifold experiments"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    RunConfig cfg;

    const auto window = [&](CLI::App* s) {
        s->add_option("--kmin", cfg.k_min, "window lower edge (0: half of pi/L)");
        s->add_option("--kmax", cfg.k_max, "window upper edge");
    };
    const auto tolerances = [&](CLI::App* s) {
        s->add_option("--tol-onmanifold", cfg.tol_onmanifold,
                      "on-manifold singular-value threshold, multiplied by 2N");
        s->add_option("--tol-singular", cfg.tol_singular, "singular-point threshold on singular values");
        s->add_option("--root-width", cfg.root_width, "bisection bracket width");
        s->add_option("--merge-distance", cfg.merge_distance, "roots closer than this are one eigenvalue");
        s->add_option("--threads", cfg.threads, "solver threads (0: hardware concurrency)");
    };
    const auto output = [&](CLI::App* s) {
        s->add_option("--out", cfg.out, "output file (empty: standard output)");
        s->add_option("--format", cfg.format, "output format")->check(CLI::IsMember({"csv", "report"}));
    };
    const auto one_graph = [&](CLI::App* s) {
        s->add_option("graph", cfg.graph_paths, "graph description file")->required()->expected(1);
        s->add_option("--lengths", cfg.lengths_path, "JSON list overriding the edge lengths");
    };
    const auto sampling = [&](CLI::App* s) {
        s->add_option("--seed", cfg.seed, "random seed");
        s->add_option("--range-low", cfg.range_low, "random length range lower bound");
        s->add_option("--range-high", cfg.range_high, "random length range upper bound");
    };

    auto* solve = app.add_subcommand("solve", "eigenvalues in (kmin, kmax] as CSV, plus the Weyl check");
    one_graph(solve);
    window(solve);
    tolerances(solve);
    output(solve);

    auto* trace = app.add_subcommand("trace", "scale-invariant trace at --k or at the --index-th eigenvalue");
    one_graph(trace);
    window(trace);
    tolerances(trace);
    output(trace);
    trace->add_option("--k", cfg.k, "eigenvalue k");
    trace->add_option("--index", cfg.index, "1-based eigenvalue index in the window, with multiplicity");

    auto* verify = app.add_subcommand("verify-factor", "loop and mandarin factorization checks");
    one_graph(verify);
    output(verify);
    verify->add_option("--samples", cfg.samples, "random torus points");
    verify->add_option("--seed", cfg.seed, "random seed");

    auto* expand = app.add_subcommand("expand", "coefficients of the secular polynomial");
    one_graph(expand);
    output(expand);

    auto* density = app.add_subcommand("density", "genericity density over random lengths");
    density->add_option("graph", cfg.graph_paths, "graph description file")->required()->expected(1);
    density->add_option("--lengths", cfg.lengths_path, "JSON list of edge lengths (default: random)");
    density->add_option("--property", cfg.property, "property to count")
        ->check(CLI::IsMember({"simple", "nonvanishing", "loop_supported"}));
    window(density);
    tolerances(density);
    sampling(density);
    output(density);

    auto* compare = app.add_subcommand("compare", "common spectrum of two graphs with shared lengths");
    compare->add_option("graphs", cfg.graph_paths, "two graph description files")->required()->expected(2);
    compare->add_option("--lengths", cfg.lengths_path, "JSON list of shared edge lengths (default: random)");
    compare->add_option("--tol-match", cfg.tol_match, "matching band is tol-match * (1 + k)");
    window(compare);
    tolerances(compare);
    sampling(compare);
    output(compare);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    for (auto* s : app.get_subcommands()) cfg.command = s->get_name();
    return execute(cfg, out, err);
}

} // namespace qgraph::cli
