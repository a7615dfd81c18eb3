#include "qgraph/scattering.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace qgraph;

namespace {

std::vector<MetricGraph> zoo() {
    return {graphs::interval(), graphs::star({1, 2, 3}), graphs::mandarin({1, 2, 3}), graphs::flower({1, 2, 3}),
            graphs::lasso(1, 2), graphs::lasso_split_tail({1, 2, 3}), graphs::dumbbell({1, 2, 3}),
            graphs::star({1, 1, 1, 1, 1})};
}

CVector random_z(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> ph(0.0, two_pi);
    CVector z(n);
    for (Eigen::Index j = 0; j < n; ++j) z[j] = std::polar(1.0, ph(rng));
    return z;
}

} // namespace

TEST_CASE("interval scattering is the swap") {
    const auto bs = build_bond_scattering(graphs::interval());
    RMatrix expect(2, 2);
    expect << 0, 1, 1, 0;
    CHECK((bs.S - expect).norm() == 0.0);
    CHECK_FALSE(bs.reversed_convention);
}

TEST_CASE("structural invariants over a graph zoo") {
    for (const auto& g : zoo()) {
        const auto bs = build_bond_scattering(g);
        const auto b = bs.bond_count();
        CHECK((bs.S * bs.S.transpose() - RMatrix::Identity(b, b)).norm() <= 1e-14);
        CHECK((bs.J * bs.J - RMatrix::Identity(b, b)).norm() == 0.0);
        Eigen::JacobiSVD<CMatrix> svd(bs.M);
        CHECK(svd.singularValues().minCoeff() > 1e-3);
        CHECK(bs.M.rows() == 2 * b);
        // vertex locality
        for (Eigen::Index beta = 0; beta < b; ++beta) {
            for (Eigen::Index alpha = 0; alpha < b; ++alpha) {
                if (bs.S(beta, alpha) == 0.0) continue;
                CHECK(detail::bond_terminus(g, static_cast<std::size_t>(alpha)) ==
                      detail::bond_origin(g, static_cast<std::size_t>(beta)));
            }
        }
        for (Eigen::Index c = 0; c < b; ++c) CHECK(bs.S.col(c).norm() == Catch::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("equilateral star center block entries") {
    const auto bs = build_bond_scattering(graphs::star({1, 1, 1}));
    // reverse bonds 3..5 arrive at the center, forward bonds 0..2 leave it
    for (Eigen::Index out = 0; out < 3; ++out) {
        for (Eigen::Index in = 3; in < 6; ++in) {
            const double expect = (in - 3 == out) ? 2.0 / 3.0 - 1.0 : 2.0 / 3.0;
            CHECK(bs.S(out, in) == Catch::Approx(expect).margin(1e-15));
        }
    }
}

TEST_CASE("U is unitary on the torus and singular at z = 1") {
    std::mt19937_64 rng(11);
    for (const auto& g : zoo()) {
        const auto bs = build_bond_scattering(g);
        const auto n = static_cast<Eigen::Index>(g.edge_count());
        const CMatrix u = evaluate_U(bs, random_z(rng, n));
        CHECK((u * u.adjoint() - CMatrix::Identity(2 * n, 2 * n)).norm() <= 1e-13);
        const CMatrix u1 = evaluate_U(bs, CVector::Ones(n));
        CHECK(std::abs((CMatrix::Identity(2 * n, 2 * n) - u1).determinant()) <= 1e-12);
    }
}

TEST_CASE("loop amplitude vector is an eigenvector with eigenvalue z_j") {
    std::mt19937_64 rng(5);
    const auto g = graphs::flower({1, 2, 3});
    const auto bs = build_bond_scattering(g);
    for (int trial = 0; trial < 20; ++trial) {
        const CVector z = random_z(rng, 3);
        for (Eigen::Index j = 0; j < 3; ++j) {
            CVector a = CVector::Zero(6);
            a[j] = 1.0;
            a[3 + j] = -1.0;
            CHECK((evaluate_U(bs, z) * a - z[j] * a).norm() <= 1e-13);
        }
    }
}

TEST_CASE("evaluate_U validates its input") {
    const auto bs = build_bond_scattering(graphs::star({1, 1, 1}));
    CHECK_THROWS_AS(evaluate_U(bs, CVector::Ones(2)), ValidationError);
    CVector z = CVector::Ones(3);
    z[1] = 1.5;
    CHECK_THROWS_AS(evaluate_U(bs, z), ValidationError);
    CHECK_NOTHROW(evaluate_U(bs, z, TorusCheck::waive));
}
