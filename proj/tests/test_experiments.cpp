#include "qgraph/experiments.hpp"

#include <catch_amalgamated.hpp>

using namespace qgraph;

namespace {

constexpr double pi = std::numbers::pi;

double kmax_for(const RVector& l, double count) { return count * pi / l.sum(); }

} // namespace

TEST_CASE("random lengths") {
    const RVector a = random_lengths(3, 42, 1.0, 2.0);
    const RVector b = random_lengths(3, 42, 1.0, 2.0);
    CHECK(a == b);
    CHECK(a != random_lengths(3, 43, 1.0, 2.0));
    CHECK(a.minCoeff() >= 1.0);
    CHECK(a.maxCoeff() <= 2.0);
    for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK_FALSE(detail::has_small_rational_ratio(random_lengths(5, seed)));
    RVector rational(2);
    rational << 1.5, 1.0;
    CHECK(detail::has_small_rational_ratio(rational));
    CHECK_THROWS_AS(random_lengths(3, 1, 2.0, 1.0), ValidationError);
    CHECK_THROWS_AS(random_lengths(3, 1, 0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(random_lengths(0, 1), ValidationError);
}

TEST_CASE("Wilson interval") {
    const auto w = wilson_interval(0, 100);
    CHECK(w.low == Catch::Approx(0.0).margin(1e-12));
    CHECK(w.high == Catch::Approx(0.037).margin(1e-3));
    const auto h = wilson_interval(50, 100);
    CHECK(h.low < 0.5);
    CHECK(h.high > 0.5);
    CHECK(h.low + h.high == Catch::Approx(1.0));
}

TEST_CASE("matching is greedy and multiplicity aware") {
    const std::vector<double> a{1.0, 2.0, 2.0, 3.0, 5.0};
    const std::vector<double> b{1.0 + 1e-9, 2.0, 4.0, 5.0 + 1e-3};
    const auto m = match_spectra(a, b, MatchTolerance{});
    REQUIRE(m.size() == 2);
    CHECK(m[0].k1 == 1.0);
    CHECK(m[1].k1 == 2.0);
}

TEST_CASE("star genericity on a small window") {
    const RVector l = random_lengths(3, 5);
    const auto g = graphs::star({1, 1, 1});
    const double kmax = kmax_for(l, 500);
    const auto simple = genericity_density(g, Property::simple, l, kmax);
    CHECK(simple.count == 0);
    CHECK(simple.total >= 490);
    const auto nonvan = genericity_density(g, Property::nonvanishing, l, kmax);
    CHECK(nonvan.count == 0);
    CHECK(nonvan.fraction == 0.0);
}

TEST_CASE("lasso loop-supported density") {
    const RVector l = random_lengths(2, 11);
    const auto r = genericity_density(graphs::lasso(1, 1), Property::loop_supported, l, kmax_for(l, 1500));
    CHECK(std::abs(r.fraction - l[0] / (2 * l.sum())) <= 0.02);
    for (const double k : r.offenders) CHECK(std::abs(std::remainder(k * l[0], 2 * pi)) <= 1e-8);
}

TEST_CASE("generic pair shares no spectrum") {
    const RVector l = random_lengths(3, 2);
    const auto r = common_spectrum(graphs::star({1, 1, 1}), graphs::mandarin({1, 1, 1}), l, kmax_for(l, 800));
    CHECK(r.fraction <= 0.001);
    MatchTolerance half{0.5e-8};
    const auto h = common_spectrum(graphs::star({1, 1, 1}), graphs::mandarin({1, 1, 1}), l, kmax_for(l, 800), half);
    CHECK(h.count == r.count);
}

TEST_CASE("mandarin and flower share the symmetric half") {
    const RVector l = random_lengths(3, 4);
    const auto m = graphs::mandarin({1, 1, 1});
    const auto f = graphs::flower({1, 1, 1});
    const auto r = common_spectrum(m, f, l, kmax_for(l, 600));
    CHECK(r.fraction >= 0.4);
    CHECK(r.fraction <= 0.6);
    // matched eigenvalues are exactly those with a loop-symmetric flower trace
    const auto fl = f.with_lengths(l);
    const auto bs = build_bond_scattering(fl);
    const auto cls = classify(fl);
    const auto w = solve_spectrum(bs, l, default_k_min(l), kmax_for(l, 600));
    std::vector<double> symmetric;
    for (const auto& rec : w.records) {
        REQUIRE(rec.multiplicity == 1);
        const auto t = kernel_traces(bs, torus_point(l, rec.k))[0];
        if (is_symmetric_on_loops(cls, t)) symmetric.push_back(rec.k);
    }
    REQUIRE(symmetric.size() == r.matched.size());
    for (std::size_t i = 0; i < symmetric.size(); ++i) CHECK(std::abs(symmetric[i] - r.matched[i].k2) <= 1e-12);
}

TEST_CASE("shared loop density") {
    const RVector l = random_lengths(3, 8);
    const auto r = common_spectrum(graphs::lasso_split_tail({1, 1, 1}), graphs::dumbbell({1, 1, 1}), l,
                                   kmax_for(l, 1500));
    CHECK(std::abs(r.fraction - l[0] / (2 * l.sum())) <= 0.02);
    const auto ladder = static_cast<std::size_t>(std::floor(kmax_for(l, 1500) * l[0] / (2 * pi)));
    CHECK(r.count >= ladder);
}

TEST_CASE("common spectrum validation") {
    const RVector l = random_lengths(3, 1);
    CHECK_THROWS_AS(common_spectrum(graphs::star({1, 1, 1}), graphs::lasso(1, 1), l, 10.0), ValidationError);
    CHECK_THROWS_AS(common_spectrum(graphs::star({1, 1, 1}), graphs::mandarin({1, 1}), l, 10.0), ValidationError);
}

TEST_CASE("reports are reproducible and complete") {
    const RVector l = random_lengths(3, 6);
    auto a = genericity_density(graphs::star({1, 1, 1}), Property::simple, l, 40.0);
    auto b = genericity_density(graphs::star({1, 1, 1}), Property::simple, l, 40.0);
    a.seed = b.seed = 6;
    CHECK(export_report(a) == export_report(b));
    const auto doc = report_to_json(a);
    for (const char* key : {"tool_version", "experiment", "property", "graphs", "lengths", "seed", "window",
                            "total_eigenvalues", "count", "fraction", "wilson_95", "offenders", "config"}) {
        CHECK(doc.contains(key));
    }
    CHECK_THROWS_AS(parse_property("bogus"), ValidationError);
}
