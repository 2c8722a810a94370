#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sketchlrf/bench.hpp"
#include "sketchlrf/lrf.hpp"
#include "sketchlrf/stream.hpp"
#include "test_util.hpp"

using namespace sketchlrf;
using namespace sketchlrf::lrf;
using namespace testutil;

namespace {

DenseMatrix orthonormal_cols(std::size_t m, std::size_t r, std::uint64_t seed) {
    return linalg::orthonormal_columns(random_gaussian(m, r, seed));
}

double objective(const DenseMatrix& o, const DenseMatrix& x, const DenseMatrix& z) {
    return linalg::frobenius_norm(o * x - z);
}

}  // namespace

TEST_CASE("rank_k_under_basis: identity basis returns the target") {
    const DenseMatrix z = random_gaussian(4, 5, 1);
    const DenseMatrix x = rank_k_under_basis(DenseMatrix::identity(4), z, 4);
    CHECK(approx_equal(x, z, 1e-12));
}

TEST_CASE("rank_k_under_basis: orthogonal target collapses to zero") {
    const DenseMatrix q = linalg::orthonormal_columns(random_gaussian(8, 5, 2));
    const DenseMatrix o = q.columns(0, 2);
    const DenseMatrix z = q.columns(2, 5) * random_gaussian(3, 4, 3);
    const DenseMatrix x = rank_k_under_basis(o, z, 2);
    CHECK(linalg::frobenius_norm(x) < 1e-10);
}

TEST_CASE("rank_k_under_basis: beats random rank-k competitors") {
    const DenseMatrix o = orthonormal_cols(6, 3, 4);
    const DenseMatrix z = random_gaussian(6, 4, 5);
    const std::size_t k = 2;
    const DenseMatrix best = rank_k_under_basis(o, z, k);
    const double best_val = objective(o, best, z);
    for (std::uint64_t t = 0; t < 1000; ++t) {
        const DenseMatrix x = random_rank_r(3, 4, k, 100000 + t);
        CHECK(best_val <= objective(o, x, z) + 1e-9);
    }
}

TEST_CASE("rank_k_under_basis: rejects non-orthonormal basis") {
    const DenseMatrix bad = random_gaussian(6, 3, 6);
    const DenseMatrix z = random_gaussian(6, 4, 7);
    CHECK_THROWS_AS((void)rank_k_under_basis(bad, z, 2), std::invalid_argument);
}

TEST_CASE("rank_k_between_bases: identity bases reduce to truncation") {
    const DenseMatrix f = random_gaussian(5, 6, 8);
    const DenseMatrix x =
        rank_k_between_bases(DenseMatrix::identity(5), DenseMatrix::identity(6), f, 2);
    CHECK(approx_equal(x, linalg::truncate_rank_k(f, 2), 1e-10));
}

TEST_CASE("rank_k_between_bases: achievable minimum is recovered") {
    const DenseMatrix c = orthonormal_cols(8, 3, 9);
    const DenseMatrix r = orthonormal_cols(7, 3, 10).transposed();
    const DenseMatrix g = random_rank_r(3, 3, 2, 11);
    const DenseMatrix f = c * g * r;
    const DenseMatrix x = rank_k_between_bases(c, r, f, 2);
    CHECK(max_abs_diff(x, g) < 1e-8);
    CHECK(linalg::frobenius_norm(c * x * r - f) < 1e-8);
}

TEST_CASE("rank_k_between_bases: beats random competitors and reduces to one-basis form") {
    const DenseMatrix c = orthonormal_cols(8, 3, 12);
    const DenseMatrix r = orthonormal_cols(7, 3, 13).transposed();
    const DenseMatrix f = random_gaussian(8, 7, 14);
    const std::size_t k = 2;
    const DenseMatrix best = rank_k_between_bases(c, r, f, k);
    const double best_val = linalg::frobenius_norm(c * best * r - f);
    for (std::uint64_t t = 0; t < 1000; ++t) {
        const DenseMatrix x = random_rank_r(3, 3, k, 200000 + t);
        CHECK(best_val <= linalg::frobenius_norm(c * x * r - f) + 1e-9);
    }

    const DenseMatrix z = random_gaussian(8, 6, 15);
    const DenseMatrix via_two = rank_k_between_bases(c, DenseMatrix::identity(6), z, k);
    const DenseMatrix via_one = rank_k_under_basis(c, z, k);
    CHECK(max_abs_diff(via_two, via_one) < 1e-10);

    CHECK_THROWS_AS((void)rank_k_between_bases(c, random_gaussian(3, 7, 16), f, 2),
                    std::invalid_argument);
}

TEST_CASE("sketched_regression: zero-residual problem reproduces identity action") {
    const DenseMatrix p = random_rank_r(30, 6, 4, 17);
    const auto phi = sketch::SketchOperator::sample(sketch::Kind::CountSketch, 20, 30, 18, 1.0);
    const DenseMatrix x = sketched_regression(p, p, phi);
    CHECK(linalg::frobenius_norm(p * x - p) <= 1e-8 * linalg::frobenius_norm(p));
}

TEST_CASE("sketched_regression: orthogonal sketch gives the exact least squares") {
    const DenseMatrix p = random_gaussian(32, 5, 19);
    const DenseMatrix q = random_gaussian(32, 3, 20);
    const auto phi = sketch::SketchOperator::sample(sketch::Kind::Srht, 32, 32, 21, 1.0);
    const DenseMatrix x = sketched_regression(p, q, phi);
    const DenseMatrix exact = inverse_oracle(gram_multiply(p, p)) * p.transposed() * q;
    CHECK(max_abs_diff(x, exact) < 1e-8);
}

TEST_CASE("sketched_regression: calibrated sketch is (1+alpha)-optimal most of the time") {
    const double alpha = 0.5;
    const auto dims = sketch::dims_nonprivate(3, alpha, 4.0);
    std::size_t hits = 0;
    const std::size_t trials = 50;
    for (std::uint64_t trial = 0; trial < trials; ++trial) {
        const DenseMatrix p = random_rank_r(200, 6, 3, 300 + trial);
        const DenseMatrix q = random_gaussian(200, 4, 400 + trial);
        const auto phi = sketch::SketchOperator::sample(sketch::Kind::CountSketch, dims.t, 200,
                                                        500 + trial, 1.0);
        const DenseMatrix xs = sketched_regression(p, q, phi);
        const DenseMatrix exact = linalg::pinv(p) * q;
        const double sketched = linalg::frobenius_norm(p * xs - q);
        const double best = linalg::frobenius_norm(p * exact - q);
        if (sketched <= (1.0 + alpha) * best) ++hits;
    }
    CHECK(hits >= 45);
}

TEST_CASE("factorize: zero matrix gives zero singular values") {
    auto st = stream::init_state(6, 5, 2, 0.5, 23, stream::Mode::NonPrivate);
    const auto report = factorize(st, 2);
    CHECK(report.factorization.degenerate);
    CHECK(report.factorization.sigma == std::vector<double>{0.0, 0.0});
    CHECK(ortho_defect(report.factorization.u) < 1e-12);
    CHECK(ortho_defect(report.factorization.v) < 1e-12);
}

TEST_CASE("factorize: exact rank-k inputs are recovered to near machine precision") {
    std::size_t hits = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const DenseMatrix a = bench::gen_lowrank_plus_noise(20, 15, 3, 0.0, 900 + trial);
        auto st = stream::init_state(20, 15, 3, 0.5, 901 + trial, stream::Mode::NonPrivate);
        stream::ingest_matrix(st, a);
        FactorizeOptions opts;
        opts.reference = &a;
        const auto report = factorize(st, 3, opts);
        if (*report.residual_fro <= 1e-6 * linalg::frobenius_norm(a)) ++hits;
    }
    CHECK(hits >= 18);
}

TEST_CASE("factorize: noisy inputs reach the (1+alpha) band most of the time") {
    std::size_t hits = 0;
    const std::size_t trials = 20;
    stream::InitOptions opts;
    opts.affine_kind = sketch::Kind::Srht;  // lossless at the clamped width
    for (std::uint64_t trial = 0; trial < trials; ++trial) {
        const DenseMatrix a = bench::gen_lowrank_plus_noise(64, 48, 5, 0.05, 1000 + trial);
        auto st = stream::init_state(64, 48, 5, 0.5, 2000 + trial, stream::Mode::NonPrivate,
                                     std::nullopt, opts);
        stream::ingest_matrix(st, a);
        FactorizeOptions opts;
        opts.reference = &a;
        opts.with_oracle = true;
        const auto report = factorize(st, 5, opts);
        REQUIRE(report.ratio.has_value());
        if (*report.ratio <= 1.5) ++hits;
        CHECK(ortho_defect(report.factorization.u) < 1e-8);
        CHECK(ortho_defect(report.factorization.v) < 1e-8);
    }
    CHECK(hits >= 17);
}

TEST_CASE("factorize: k beyond min(t, v) is rejected") {
    auto st = stream::init_state(6, 5, 2, 0.5, 23, stream::Mode::NonPrivate);
    CHECK_THROWS_AS((void)factorize(st, st.dims.t + 1), std::invalid_argument);
}

TEST_CASE("factorize_one_sided mirrors the two-sided behavior") {
    const auto s0 = sketch::SketchOperator::sample(sketch::Kind::CountSketch, 4, 6, 1, 1.0);
    const auto zero_report = factorize_one_sided(DenseMatrix(6, 4), DenseMatrix(4, 5), s0, 2);
    CHECK(zero_report.factorization.degenerate);

    std::size_t exact_hits = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const DenseMatrix a = bench::gen_lowrank_plus_noise(20, 15, 3, 0.0, 1100 + trial);
        const auto dims = sketch::dims_nonprivate(3, 0.5, 4.0);
        const std::size_t t = std::min<std::size_t>(dims.t, 15);
        const std::size_t v = std::min<std::size_t>(dims.v, 20);
        const auto phi = sketch::SketchOperator::sample(sketch::Kind::CountSketch, t, 15,
                                                        1200 + trial, 1.0);
        const auto s = sketch::SketchOperator::sample(sketch::Kind::CountSketch, v, 20,
                                                      1300 + trial, 1.0);
        const DenseMatrix y = phi.apply_right(a);
        const DenseMatrix z = s.apply_left(a);
        FactorizeOptions opts;
        opts.reference = &a;
        const auto report = factorize_one_sided(y, z, s, 3, opts);
        if (*report.residual_fro <= 1e-6 * linalg::frobenius_norm(a)) ++exact_hits;
    }
    CHECK(exact_hits >= 18);

    std::size_t hits = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const DenseMatrix a = bench::gen_lowrank_plus_noise(64, 48, 5, 0.05, 1400 + trial);
        const auto dims = sketch::dims_nonprivate(5, 0.5, 4.0);
        const std::size_t t = std::min<std::size_t>(dims.t, 48);
        const std::size_t v = std::min<std::size_t>(dims.v, 64);
        const auto phi = sketch::SketchOperator::sample(sketch::Kind::CountSketch, t, 48,
                                                        1500 + trial, 1.0);
        const auto s = sketch::SketchOperator::sample(sketch::Kind::CountSketch, v, 64,
                                                      1600 + trial, 1.0);
        FactorizeOptions opts;
        opts.reference = &a;
        opts.with_oracle = true;
        const auto report =
            factorize_one_sided(phi.apply_right(a), s.apply_left(a), s, 5, opts);
        if (report.ratio && *report.ratio <= 1.5) ++hits;
    }
    CHECK(hits >= 17);
}

TEST_CASE("BWZ16 chain: two sketched regressions reach (1+alpha)^2") {
    const double alpha = 0.5;
    const auto dims = sketch::dims_nonprivate(3, alpha, 4.0);
    std::size_t hits = 0;
    const std::size_t trials = 30;
    for (std::uint64_t trial = 0; trial < trials; ++trial) {
        const DenseMatrix a = bench::gen_lowrank_plus_noise(40, 30, 3, 0.05, 1700 + trial);
        const std::size_t t = std::min<std::size_t>(dims.t, 30);
        const auto phi_op = sketch::SketchOperator::sample(sketch::Kind::CountSketch, t, 30,
                                                           1800 + trial, 1.0);
        const auto psi_op = sketch::SketchOperator::sample(sketch::Kind::CountSketch, t, 40,
                                                           1900 + trial, 1.0);
        const DenseMatrix ak = linalg::truncate_rank_k(a, 3);
        const DenseMatrix a_phi = phi_op.apply_right(a);
        const DenseMatrix ak_phi = phi_op.apply_right(ak);
        const DenseMatrix psi_a = psi_op.apply_left(a);
        const DenseMatrix left = a_phi * linalg::pinv(ak_phi);
        const DenseMatrix mid = linalg::pinv(psi_op.apply_left(left));
        const DenseMatrix reconstructed = left * mid * psi_a;
        const double err = linalg::frobenius_norm(reconstructed - a);
        const double opt = linalg::frobenius_norm(a - ak);
        if (err <= (1.0 + alpha) * (1.0 + alpha) * opt) ++hits;
    }
    CHECK(hits >= 27);
}

TEST_CASE("LrfReport carries residual and ratio when a reference is given") {
    const DenseMatrix a = bench::gen_lowrank_plus_noise(16, 12, 2, 0.1, 3100);
    auto st = stream::init_state(16, 12, 2, 0.5, 3200, stream::Mode::NonPrivate);
    stream::ingest_matrix(st, a);
    const auto plain = factorize(st, 2);
    CHECK_FALSE(plain.residual_fro.has_value());
    FactorizeOptions opts;
    opts.reference = &a;
    opts.with_oracle = true;
    const auto full = factorize(st, 2, opts);
    REQUIRE(full.residual_fro.has_value());
    REQUIRE(full.oracle_residual_fro.has_value());
    REQUIRE(full.ratio.has_value());
    CHECK(*full.ratio >= 1.0 - 1e-9);
    CHECK(full.wall_time_ms >= 0.0);
}
