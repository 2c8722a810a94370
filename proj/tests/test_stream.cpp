#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "sketchlrf/stream.hpp"
#include "test_util.hpp"

using namespace sketchlrf;
using namespace sketchlrf::stream;
using namespace testutil;

namespace {

dp::PrivacyParams test_params(dp::PrivacyLevel level, double alpha = 0.5) {
    dp::PrivacyParams p;
    p.epsilon = 1.0;
    p.delta = 0.01;
    p.level = level;
    p.alpha = alpha;
    return p;
}

DenseMatrix integer_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
    DenseMatrix a(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a(i, j) =
                static_cast<double>(static_cast<long long>(rng::below(seed, i * n + j, 19)) - 9);
    return a;
}

DenseMatrix oracle_y_c(const SketchState& st, const DenseMatrix& a) {
    return st.phi->apply_right(a);
}
DenseMatrix oracle_y_r(const SketchState& st, const DenseMatrix& a) {
    return st.psi->apply_left(a);
}
DenseMatrix oracle_z(const SketchState& st, const DenseMatrix& a) {
    return st.s->apply_left(st.t_op->apply_right(a));
}

}  // namespace

TEST_CASE("init_state: zero stream keeps non-private sketches zero") {
    const auto st = init_state(4, 4, 2, 0.5, 7, Mode::NonPrivate);
    CHECK(linalg::frobenius_norm(st.y_c) == 0.0);
    CHECK(linalg::frobenius_norm(st.y_r) == 0.0);
    CHECK(linalg::frobenius_norm(st.z) == 0.0);
    CHECK(st.updates_seen == 0);
    CHECK(st.dims.t == 4);  // clamped to min(m, n)
    CHECK(st.dims.v == 4);
}

TEST_CASE("init_state: mode/params consistency is enforced") {
    CHECK_THROWS_AS((void)init_state(4, 4, 2, 0.5, 7, Mode::NonPrivate,
                                     test_params(dp::PrivacyLevel::Priv2)),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)init_state(4, 4, 2, 0.5, 7, Mode::Priv2), std::invalid_argument);
    CHECK_THROWS_AS((void)init_state(4, 4, 2, 0.5, 7, Mode::Priv2,
                                     test_params(dp::PrivacyLevel::Priv1)),
                    std::invalid_argument);
    // alpha disagreement between state and params
    CHECK_THROWS_AS((void)init_state(4, 4, 2, 0.25, 7, Mode::Priv2,
                                     test_params(dp::PrivacyLevel::Priv2, 0.5)),
                    std::invalid_argument);
    // Priv1 needs alpha < 1
    CHECK_THROWS_AS((void)init_state(4, 4, 2, 1.0, 7, Mode::Priv1,
                                     test_params(dp::PrivacyLevel::Priv1, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("ingest: cancel pair returns sketches to initial values") {
    auto st = init_state(6, 5, 2, 0.5, 11, Mode::NonPrivate);
    ingest(st, {0, 0, 1.0});
    ingest(st, {0, 0, -1.0});
    CHECK(linalg::frobenius_norm(st.y_c) == 0.0);  // CountSketch path is exact
    CHECK(linalg::frobenius_norm(st.y_r) == 0.0);
    CHECK(linalg::frobenius_norm(st.z) == 0.0);
    CHECK(st.updates_seen == 2);

    InitOptions gaussian_opts;
    gaussian_opts.regression_kind = sketch::Kind::Gaussian;
    gaussian_opts.affine_kind = sketch::Kind::Gaussian;
    auto gst = init_state(6, 5, 2, 0.5, 11, Mode::NonPrivate, std::nullopt, gaussian_opts);
    ingest(gst, {2, 3, 2.5});
    ingest(gst, {2, 3, -2.5});
    CHECK(linalg::frobenius_norm(gst.y_c) < 1e-12);
    CHECK(linalg::frobenius_norm(gst.y_r) < 1e-12);
    CHECK(linalg::frobenius_norm(gst.z) < 1e-12);
}

TEST_CASE("ingest: full pass equals one-shot sketches of the matrix") {
    const DenseMatrix a = random_gaussian(8, 6, 404);
    auto st = init_state(8, 6, 3, 0.5, 21, Mode::NonPrivate);
    ingest_matrix(st, a);
    CHECK(max_abs_diff(st.y_c, oracle_y_c(st, a)) < 1e-12);
    CHECK(max_abs_diff(st.y_r, oracle_y_r(st, a)) < 1e-12);
    CHECK(max_abs_diff(st.z, oracle_z(st, a)) < 1e-12);
}

TEST_CASE("ingest: SRHT-backed state matches one-shot sketches") {
    const DenseMatrix a = random_gaussian(8, 8, 405);
    InitOptions opts;
    opts.regression_kind = sketch::Kind::Srht;
    opts.affine_kind = sketch::Kind::Srht;
    auto st = init_state(8, 8, 2, 0.5, 22, Mode::NonPrivate, std::nullopt, opts);
    ingest_matrix(st, a);
    CHECK(max_abs_diff(st.y_c, oracle_y_c(st, a)) < 1e-10);
    CHECK(max_abs_diff(st.y_r, oracle_y_r(st, a)) < 1e-10);
    CHECK(max_abs_diff(st.z, oracle_z(st, a)) < 1e-10);
}

TEST_CASE("ingest: index and value validation") {
    auto st = init_state(4, 5, 2, 0.5, 3, Mode::NonPrivate);
    CHECK_THROWS_AS(ingest(st, {4, 0, 1.0}), std::out_of_range);
    CHECK_THROWS_AS(ingest(st, {0, 5, 1.0}), std::out_of_range);
    CHECK_THROWS_AS(ingest(st, {0, 0, std::nan("")}), std::invalid_argument);
}

TEST_CASE("single-pass equivalence: update order does not matter") {
    const DenseMatrix a = integer_matrix(8, 6, 777);
    std::vector<TurnstileUpdate> updates;
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            if (a(i, j) != 0.0) updates.push_back({i, j, a(i, j)});

    auto reference = init_state(8, 6, 3, 0.5, 99, Mode::NonPrivate);
    for (const auto& u : updates) ingest(reference, u);

    for (std::uint64_t perm = 0; perm < 50; ++perm) {
        auto shuffled = updates;
        for (std::size_t i = shuffled.size(); i > 1; --i) {
            const std::size_t j = rng::below(rng::derive(5000 + perm, 1), i, i);
            std::swap(shuffled[i - 1], shuffled[j]);
        }
        auto st = init_state(8, 6, 3, 0.5, 99, Mode::NonPrivate);
        for (const auto& u : shuffled) ingest(st, u);
        // sign-based operators on integer data: bit-exact
        CHECK(max_abs_diff(st.y_c, reference.y_c) == 0.0);
        CHECK(max_abs_diff(st.y_r, reference.y_r) == 0.0);
        CHECK(max_abs_diff(st.z, reference.z) == 0.0);
    }

    // Gaussian-backed sketches agree up to rounding
    InitOptions gopts;
    gopts.regression_kind = sketch::Kind::Gaussian;
    auto gref = init_state(8, 6, 3, 0.5, 98, Mode::NonPrivate, std::nullopt, gopts);
    for (const auto& u : updates) ingest(gref, u);
    for (std::uint64_t perm = 0; perm < 5; ++perm) {
        auto shuffled = updates;
        for (std::size_t i = shuffled.size(); i > 1; --i) {
            const std::size_t j = rng::below(rng::derive(6000 + perm, 1), i, i);
            std::swap(shuffled[i - 1], shuffled[j]);
        }
        auto st = init_state(8, 6, 3, 0.5, 98, Mode::NonPrivate, std::nullopt, gopts);
        for (const auto& u : shuffled) ingest(st, u);
        CHECK(max_abs_diff(st.y_c, gref.y_c) < 1e-10);
        CHECK(max_abs_diff(st.y_r, gref.y_r) < 1e-10);
    }
}

TEST_CASE("Priv2 state maintains the one-sided pair") {
    const DenseMatrix a = random_gaussian(7, 9, 11);
    auto st = init_state(7, 9, 2, 0.5, 31, Mode::Priv2, test_params(dp::PrivacyLevel::Priv2));
    ingest_matrix(st, a);
    CHECK(st.y_c.rows() == 7);
    CHECK(st.z.cols() == 9);
    CHECK(max_abs_diff(st.y_c, st.phi->apply_right(a)) < 1e-12);
    CHECK(max_abs_diff(st.z, st.s->apply_left(a)) < 1e-12);
}

TEST_CASE("Priv1 init pre-seeds the sigma_min identity block") {
    const std::size_t m = 6, n = 9;
    auto st = init_state(m, n, 2, 0.5, 41, Mode::Priv1, test_params(dp::PrivacyLevel::Priv1));
    REQUIRE_FALSE(st.transposed);
    const double sigma = st.scales.sigma_min;
    CHECK(sigma > 0.0);

    // dense oracle on the augmented matrix (0 | sigma I)
    DenseMatrix hat(m, m + n);
    for (std::size_t i = 0; i < m; ++i) hat(i, n + i) = sigma;

    const DenseMatrix psi_m = st.psi->materialize();
    CHECK(max_abs_diff(st.y_r, psi_m * hat) < 1e-9);
    CHECK(linalg::frobenius_norm(st.y_r) > 0.0);

    const DenseMatrix phi_m = st.phi->materialize();  // u x (m+n)
    const DenseMatrix phi_hat =
        (1.0 / static_cast<double>(st.dims.t)) * (phi_m.transposed() * st.omega);
    CHECK(max_abs_diff(st.y_c, hat * phi_hat) < 1e-9);

    const DenseMatrix t_m = st.t_op->materialize();
    CHECK(max_abs_diff(st.z, st.s->materialize() * hat * t_m.transposed()) < 1e-9);
}

TEST_CASE("Priv1 ingest matches the augmented-matrix oracle") {
    const std::size_t m = 5, n = 8;
    const DenseMatrix a = random_gaussian(m, n, 52);
    auto st = init_state(m, n, 2, 0.5, 42, Mode::Priv1, test_params(dp::PrivacyLevel::Priv1));
    ingest_matrix(st, a);

    DenseMatrix hat(m, m + n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) hat(i, j) = a(i, j);
        hat(i, n + i) = st.scales.sigma_min;
    }
    const DenseMatrix phi_hat =
        (1.0 / static_cast<double>(st.dims.t)) * (st.phi->materialize().transposed() * st.omega);
    CHECK(max_abs_diff(st.y_c, hat * phi_hat) < 1e-8);
    CHECK(max_abs_diff(st.y_r, st.psi->materialize() * hat) < 1e-9);
    CHECK(max_abs_diff(st.z, st.s->materialize() * hat * st.t_op->materialize().transposed()) <
          1e-9);
}

TEST_CASE("Priv1 case 2 equals case 1 on the transpose") {
    const DenseMatrix a = random_gaussian(9, 5, 63);  // m > n: case 2
    auto wide = init_state(9, 5, 2, 0.5, 43, Mode::Priv1, test_params(dp::PrivacyLevel::Priv1));
    REQUIRE(wide.transposed);
    auto tall = init_state(5, 9, 2, 0.5, 43, Mode::Priv1, test_params(dp::PrivacyLevel::Priv1));
    REQUIRE_FALSE(tall.transposed);

    // identical internal update sequences make the comparison bit-exact
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (a(i, j) == 0.0) continue;
            ingest(wide, {i, j, a(i, j)});
            ingest(tall, {j, i, a(i, j)});
        }
    }
    CHECK(max_abs_diff(wide.y_c, tall.y_c) == 0.0);
    CHECK(max_abs_diff(wide.y_r, tall.y_r) == 0.0);
    CHECK(max_abs_diff(wide.z, tall.z) == 0.0);
}

TEST_CASE("stream file parsing") {
    {
        std::ofstream out("stream_ok.txt");
        out << "# comment first\n% 4 6\n0 0 1.5\n\n# another comment\n3 5 -2.25\n";
    }
    std::size_t m = 0, n = 0;
    const auto updates = read_stream("stream_ok.txt", m, n);
    CHECK(m == 4);
    CHECK(n == 6);
    REQUIRE(updates.size() == 2);
    CHECK(updates[0].row == 0);
    CHECK(updates[0].col == 0);
    CHECK(updates[0].delta == 1.5);
    CHECK(updates[1].row == 3);
    CHECK(updates[1].col == 5);
    CHECK(updates[1].delta == -2.25);
    std::remove("stream_ok.txt");
}

TEST_CASE("stream file errors carry line numbers and indices") {
    {
        std::ofstream out("stream_bad.txt");
        out << "% 4 6\na b c\n";
    }
    try {
        std::size_t m, n;
        (void)read_stream("stream_bad.txt", m, n);
        FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
        CHECK(std::string(e.what()).find("malformed") != std::string::npos);
    }
    std::remove("stream_bad.txt");

    {
        std::ofstream out("stream_range.txt");
        out << "% 4 6\n9 0 1.0\n";
    }
    try {
        std::size_t m, n;
        (void)read_stream("stream_range.txt", m, n);
        FAIL("expected range error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find('9') != std::string::npos);
    }
    std::remove("stream_range.txt");

    {
        std::ofstream out("stream_nohdr.txt");
        out << "0 0 1.0\n";
    }
    std::size_t m, n;
    CHECK_THROWS_AS((void)read_stream("stream_nohdr.txt", m, n), std::runtime_error);
    std::remove("stream_nohdr.txt");
}

TEST_CASE("CRLF stream files parse identically") {
    {
        std::ofstream out("stream_crlf.txt", std::ios::binary);
        out << "% 2 2\r\n0 1 3.5\r\n1 0 -1\r\n";
    }
    {
        std::ofstream out("stream_lf.txt", std::ios::binary);
        out << "% 2 2\n0 1 3.5\n1 0 -1\n";
    }
    std::size_t m1, n1, m2, n2;
    const auto u1 = read_stream("stream_crlf.txt", m1, n1);
    const auto u2 = read_stream("stream_lf.txt", m2, n2);
    REQUIRE(u1.size() == u2.size());
    for (std::size_t i = 0; i < u1.size(); ++i) {
        CHECK(u1[i].row == u2[i].row);
        CHECK(u1[i].col == u2[i].col);
        CHECK(u1[i].delta == u2[i].delta);
    }
    std::remove("stream_crlf.txt");
    std::remove("stream_lf.txt");
}
