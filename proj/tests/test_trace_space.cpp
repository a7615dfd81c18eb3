#include "qgraph/trace_space.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace qgraph;

namespace {

constexpr double pi = std::numbers::pi;

// Edge equations as a 2N x 4N matrix acting on per-edge (A, B, C, D).
CMatrix edge_equations(const CVector& z) {
    const Eigen::Index n = z.size();
    const Complex i1{0.0, 1.0};
    CMatrix e = CMatrix::Zero(2 * n, 4 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        e(2 * j, 4 * j) = 1.0;
        e(2 * j, 4 * j + 1) = i1;
        e(2 * j, 4 * j + 2) = -z[j];
        e(2 * j, 4 * j + 3) = i1 * z[j];
        e(2 * j + 1, 4 * j + 2) = 1.0;
        e(2 * j + 1, 4 * j + 3) = i1;
        e(2 * j + 1, 4 * j) = -z[j];
        e(2 * j + 1, 4 * j + 1) = i1 * z[j];
    }
    return e;
}

// Null space of the full trace-space system, straight from the equations.
CMatrix fiber_oracle(const MetricGraph& g, const CVector& z) {
    const auto n = static_cast<Eigen::Index>(g.edge_count());
    CMatrix sys(4 * n, 4 * n);
    sys.topRows(2 * n) = standard_vertex_matrix(g).cast<Complex>();
    sys.bottomRows(2 * n) = edge_equations(z);
    Eigen::JacobiSVD<CMatrix> svd(sys, Eigen::ComputeFullV);
    const RVector s = svd.singularValues();
    Eigen::Index dim = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] <= 1e-8) ++dim;
    return svd.matrixV().rightCols(dim);
}

double distance_to_span(const CVector& x, const CMatrix& basis) {
    return (x - basis * (basis.adjoint() * x)).norm();
}

} // namespace

TEST_CASE("interval trace at k = 1") {
    const auto g = graphs::interval(pi);
    const auto bs = build_bond_scattering(g);
    const auto traces = kernel_traces(bs, torus_point(g.length_vector(), 1.0));
    REQUIRE(traces.size() == 1);
    CVector expect(4);
    expect << 1.0, 0.0, -1.0, 0.0;
    expect /= std::sqrt(2.0);
    CHECK((traces[0].x - expect).norm() <= 1e-12);
    CHECK(nonvanishing_test(g, traces[0]).nonvanishing);
    CHECK_THROWS_WITH(kernel_traces(bs, torus_point(g.length_vector(), 1.5)),
                      Catch::Matchers::StartsWith("empty fiber"));
}

TEST_CASE("fiber matches the equation-level oracle on random eigenvalues") {
    const auto g = graphs::star({1.0, 1.37, 1.71});
    const auto bs = build_bond_scattering(g);
    const RVector l = g.length_vector();
    const auto w = solve_spectrum(bs, l, 0.1, 40.0);
    REQUIRE(w.records.size() >= 50);
    for (std::size_t i = 0; i < 50; ++i) {
        const auto& rec = w.records[i];
        const CVector z = torus_point(l, rec.k);
        const auto traces = kernel_traces(bs, z);
        const CMatrix oracle = fiber_oracle(g, z);
        CHECK(static_cast<int>(traces.size()) == rec.multiplicity);
        CHECK(oracle.cols() == rec.multiplicity);
        for (const auto& t : traces) {
            CHECK(distance_to_span(t.x, oracle) <= 1e-8);
            const auto r = trace_residuals(bs, z, t.x);
            CHECK(r.vertex_residual <= 1e-10);
            CHECK(r.max_edge_residual() <= 1e-10);
            CHECK(r.max_norm_mismatch() <= 1e-10);
            CHECK(imaginary_residue(t.x) <= 1e-8);
            CHECK(t.x.norm() == Catch::Approx(1.0));
        }
    }
}

TEST_CASE("multi-dimensional fibers are realified jointly") {
    const auto g = graphs::star({1, 1, 1});
    const auto bs = build_bond_scattering(g);
    const CVector z = CVector::Constant(3, Complex{0.0, 1.0});
    const auto traces = kernel_traces(bs, z);
    REQUIRE(traces.size() == 2);
    for (const auto& t : traces) {
        CHECK(t.x.imag().cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(trace_residuals(bs, z, t.x).vertex_residual <= 1e-10);
    }
    CHECK(std::abs(traces[0].x.dot(traces[1].x)) <= 1e-12);
}

TEST_CASE("residuals respond linearly to a perturbation") {
    const auto g = graphs::star({1.0, 1.37, 1.71});
    const auto bs = build_bond_scattering(g);
    const RVector l = g.length_vector();
    const auto w = solve_spectrum(bs, l, 0.1, 5.0);
    const CVector z = torus_point(l, w.records[0].k);
    const auto t = kernel_traces(bs, z)[0];
    for (const double eps : {1e-6, 1e-4}) {
        CVector x = t.x;
        x[0] += eps;
        const auto r = trace_residuals(bs, z, x);
        const double total = r.vertex_residual + r.max_edge_residual();
        CHECK(total >= 0.5 * eps);
        CHECK(total <= 4.0 * eps);
    }
}

TEST_CASE("eigenfunction evaluation") {
    const auto g = graphs::star({1.0, 1.37, 1.71});
    const auto bs = build_bond_scattering(g);
    const RVector l = g.length_vector();
    const auto w = solve_spectrum(bs, l, 0.1, 10.0);
    const double k = w.records[3].k;
    const auto t = kernel_traces(bs, torus_point(l, k))[0];
    for (std::size_t j = 0; j < 3; ++j) {
        const double lj = l[static_cast<Eigen::Index>(j)];
        CHECK(std::abs(eigenfunction_eval(t, k, l, j, 0.0) - t.A(j)) <= 1e-15);
        CHECK(std::abs(eigenfunction_eval_far(t, k, l, j, lj) - t.C(j)) <= 1e-15);
        for (int s = 0; s <= 10; ++s) {
            const double arc = std::min(lj, lj * s / 10.0);
            CHECK(std::abs(eigenfunction_eval(t, k, l, j, arc) - eigenfunction_eval_far(t, k, l, j, arc)) <= 1e-9);
        }
    }
    // continuity and balanced derivatives at the center, via finite differences
    const double h = 1e-6;
    Complex deriv_sum{0.0, 0.0};
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(std::abs(eigenfunction_eval(t, k, l, j, 0.0) - eigenfunction_eval(t, k, l, 0, 0.0)) <= 1e-9);
        deriv_sum += (eigenfunction_eval(t, k, l, j, h) - eigenfunction_eval(t, k, l, j, 0.0)) / h;
    }
    CHECK(std::abs(deriv_sum) <= 1e-5);
    CHECK_THROWS_AS(eigenfunction_eval(t, k, l, 0, -0.1), ValidationError);
    CHECK_THROWS_AS(eigenfunction_eval(t, k, l, 0, 1.5), ValidationError);
    CHECK_THROWS_AS(eigenfunction_eval(t, k, l, 3, 0.0), ValidationError);
}

TEST_CASE("lasso loop-supported eigenfunction") {
    const double loop = 1.0, tail = 1.618;
    const auto g = graphs::lasso(loop, tail);
    const auto bs = build_bond_scattering(g);
    const auto cls = classify(g);
    const double k = 2.0 * pi / loop * 3.0;
    const CVector z = torus_point(g.length_vector(), k);
    const auto traces = kernel_traces(bs, z);
    REQUIRE(traces.size() == 1);
    const auto& t = traces[0];
    const auto sym = classify_symmetry(g, cls, t);
    CHECK(sym.kind == SymmetryClass::Kind::loop_supported);
    CHECK(sym.loop_edge == 0);
    CHECK_FALSE(nonvanishing_test(g, t).nonvanishing);
    const auto support = edge_support(bs, z, t);
    CHECK_FALSE(support[0]);
    CHECK(support[1]);
    // full-support eigenfunction away from the loop ladder
    const auto w = solve_spectrum(bs, g.length_vector(), 0.1, 3.0);
    for (const auto& rec : w.records) {
        if (std::abs(std::remainder(rec.k * loop, 2 * pi)) < 1e-6) continue;
        const CVector zr = torus_point(g.length_vector(), rec.k);
        const auto tr = kernel_traces(bs, zr)[0];
        CHECK(classify_symmetry(g, cls, tr).kind == SymmetryClass::Kind::generic);
        CHECK(secular_gradient(bs, zr).cwiseAbs().minCoeff() > 1e-6);
        const auto s = edge_support(bs, zr, tr);
        CHECK_FALSE(s[0]);
        CHECK_FALSE(s[1]);
    }
}

TEST_CASE("mandarin traces are symmetric or antisymmetric") {
    const auto g = graphs::mandarin({1.0, 1.29, 0.87});
    const auto bs = build_bond_scattering(g);
    const auto cls = classify(g);
    const auto w = solve_spectrum(bs, g.length_vector(), 0.1, 30.0);
    int sym = 0, anti = 0;
    for (const auto& rec : w.records) {
        REQUIRE(rec.multiplicity == 1);
        const auto t = kernel_traces(bs, torus_point(g.length_vector(), rec.k))[0];
        const auto c = classify_symmetry(g, cls, t);
        if (c.kind == SymmetryClass::Kind::mandarin_symmetric) ++sym;
        if (c.kind == SymmetryClass::Kind::mandarin_antisymmetric) ++anti;
    }
    CHECK(sym + anti == static_cast<int>(w.records.size()));
    CHECK(sym > 0);
    CHECK(anti > 0);
}

TEST_CASE("star traces are generic") {
    const auto g = graphs::star({1.0, 1.37, 1.71});
    const auto bs = build_bond_scattering(g);
    const auto cls = classify(g);
    const auto w = solve_spectrum(bs, g.length_vector(), 0.1, 10.0);
    for (const auto& rec : w.records) {
        const auto t = kernel_traces(bs, torus_point(g.length_vector(), rec.k))[0];
        CHECK(classify_symmetry(g, cls, t).kind == SymmetryClass::Kind::generic);
    }
}

TEST_CASE("a mixed mandarin trace is unclassified") {
    const auto g = graphs::mandarin({1, 1, 1});
    TraceVector t;
    t.z = CVector::Ones(3);
    t.x = CVector::Zero(12);
    t.x[0] = 1.0; // A_0 without a matching C_0 of either sign
    t.x[2] = 0.5;
    CHECK_THROWS_WITH(classify_symmetry(g, classify(g), t), Catch::Matchers::StartsWith("unclassified"));
}

TEST_CASE("nonvanishing excludes only leaf Neumann entries") {
    const auto g = graphs::star({1, 1, 1});
    TraceVector t;
    t.z = CVector::Ones(3);
    t.x = CVector::Constant(12, 0.5);
    for (std::size_t j = 0; j < 3; ++j) t.x[static_cast<Eigen::Index>(4 * j + 3)] = 0.0; // D at leaves
    CHECK(nonvanishing_test(g, t).nonvanishing);
    t.x[1] = 0.0; // B at the center is not excluded
    const auto r = nonvanishing_test(g, t);
    CHECK_FALSE(r.nonvanishing);
    CHECK(r.min_index == 1);
}

TEST_CASE("scale invariance of traces") {
    const auto g = graphs::star({1.0, 1.37, 1.71});
    const RVector l = g.length_vector();
    const auto bs = build_bond_scattering(g);
    const auto w = solve_spectrum(bs, l, 0.1, 12.0);
    for (const double r : {0.5, 2.0, 3.7}) {
        const auto gs = g.with_lengths(RVector(r * l));
        const auto bss = build_bond_scattering(gs);
        for (const auto& rec : w.records) {
            const auto a = kernel_traces(bs, torus_point(l, rec.k))[0];
            const auto b = kernel_traces(bss, torus_point(r * l, rec.k / r))[0];
            CHECK((a.x - b.x).norm() <= 1e-8);
        }
    }
}

TEST_CASE("trace export") {
    const auto g = graphs::interval(pi);
    const auto bs = build_bond_scattering(g);
    const auto t = kernel_traces(bs, torus_point(g.length_vector(), 1.0))[0];
    const std::string text = export_trace(t, 1.0);
    CHECK(text.rfind("k,1,z,-1,", 0) == 0);
    CHECK(text.find("\nedge_id,A_re,A_im,B_re,B_im,C_re,C_im,D_re,D_im\n0,0.70710678118654") !=
          std::string::npos);
}
