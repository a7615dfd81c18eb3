// Lowest eigenvalues of a star with rationally independent edge lengths,
// with the trace of the first eigenfunction and the Weyl check.

#include "qgraph/qgraph.hpp"

#include <cstdio>

int main() {
    using namespace qgraph;
    const RVector l = random_lengths(3, 7);
    const MetricGraph g = graphs::star({1, 1, 1}).with_lengths(l);
    const BondSystem bs = build_bond_scattering(g);

    const SpectrumWindow w = solve_spectrum(bs, l, default_k_min(l), 10.0);
    std::fputs(export_spectrum_csv(w).c_str(), stdout);
    std::fputs(format_weyl(weyl_check(w)).c_str(), stdout);

    const double k = w.records.front().k;
    const TraceVector t = kernel_traces(bs, torus_point(l, k)).front();
    std::fputs(export_trace(t, k).c_str(), stdout);
    std::printf("nonvanishing=%s\n", nonvanishing_test(g, t).nonvanishing ? "true" : "false");
    return 0;
}
