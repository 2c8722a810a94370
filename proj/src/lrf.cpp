#include "sketchlrf/lrf.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace sketchlrf::lrf {

namespace {

constexpr double kBasisTol = 1e-8;

bool is_orthonormal_columns(const DenseMatrix& q) {
    const DenseMatrix g = gram_multiply(q, q);
    return max_abs_diff(g, DenseMatrix::identity(q.cols())) <= kBasisTol;
}

// Multiply columns of m by the inverted singular values (pseudo-inverse of
// the diagonal). linalg::svd already truncated at numerical rank, so every
// returned sigma is invertible.
DenseMatrix scale_columns_inv(const DenseMatrix& m, const std::vector<double>& sigma) {
    DenseMatrix out = m;
    for (std::size_t j = 0; j < sigma.size(); ++j) {
        const double inv = 1.0 / sigma[j];
        for (std::size_t i = 0; i < out.rows(); ++i) out(i, j) *= inv;
    }
    return out;
}

Factorization zero_factorization(std::size_t m, std::size_t n, std::size_t k) {
    Factorization f;
    f.u = linalg::complete_orthonormal(DenseMatrix(m, 0), k);
    f.v = linalg::complete_orthonormal(DenseMatrix(n, 0), k);
    f.sigma.assign(k, 0.0);
    f.k = k;
    f.effective_rank = 0;
    f.degenerate = true;
    return f;
}

// Extend factors of effective rank r to the requested k with orthonormal
// completions and zero singular values.
Factorization pad_to_k(DenseMatrix u, std::vector<double> sigma, DenseMatrix v,
                       std::size_t k) {
    Factorization f;
    f.effective_rank = sigma.size();
    f.u = linalg::complete_orthonormal(u, k);
    f.v = linalg::complete_orthonormal(v, k);
    sigma.resize(k, 0.0);
    f.sigma = std::move(sigma);
    f.k = k;
    return f;
}

class Stopwatch {
  public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

DenseMatrix rank_k_under_basis(const DenseMatrix& o, const DenseMatrix& z, std::size_t k) {
    if (o.rows() != z.rows()) throw std::invalid_argument("rank_k_under_basis: dim mismatch");
    if (!is_orthonormal_columns(o))
        throw std::invalid_argument("rank_k_under_basis: basis columns not orthonormal");
    return linalg::truncate_rank_k(gram_multiply(o, z), k);
}

DenseMatrix rank_k_between_bases(const DenseMatrix& c, const DenseMatrix& r,
                                 const DenseMatrix& f, std::size_t k) {
    if (c.rows() != f.rows() || r.cols() != f.cols())
        throw std::invalid_argument("rank_k_between_bases: dim mismatch");
    if (!is_orthonormal_columns(c))
        throw std::invalid_argument("rank_k_between_bases: c columns not orthonormal");
    if (!is_orthonormal_columns(r.transposed()))
        throw std::invalid_argument("rank_k_between_bases: r rows not orthonormal");
    return linalg::truncate_rank_k(gram_multiply(c, multiply_bt(f, r)), k);
}

DenseMatrix sketched_regression(const DenseMatrix& p, const DenseMatrix& q,
                                const sketch::SketchOperator& phi) {
    if (p.rows() != q.rows()) throw std::invalid_argument("sketched_regression: dim mismatch");
    return linalg::pinv(phi.apply_left(p)) * phi.apply_left(q);
}

Factorization two_sided_pipeline(const DenseMatrix& y_c, const DenseMatrix& y_r,
                                 const DenseMatrix& z, const sketch::SketchOperator& s,
                                 const sketch::SketchOperator& t_op, std::size_t k) {
    const std::size_t m = y_c.rows();
    const std::size_t n = y_r.cols();
    const DenseMatrix u_basis = linalg::orthonormal_columns(y_c);
    const DenseMatrix v_basis = linalg::orthonormal_rows(y_r);
    if (u_basis.cols() == 0 || v_basis.rows() == 0) return zero_factorization(m, n, k);

    const auto fs = linalg::svd(s.apply_left(u_basis));       // S U
    const auto ft = linalg::svd(t_op.apply_right(v_basis));   // V T^T
    if (fs.rank() == 0 || ft.rank() == 0) return zero_factorization(m, n, k);

    // core = [U_s^T Z V_t]_k surrounded by the inverted sketch spectra
    const DenseMatrix inner = gram_multiply(fs.u, z) * ft.v;
    const DenseMatrix inner_k = linalg::truncate_rank_k(inner, k);
    const DenseMatrix x_tilde = scale_columns_inv(fs.v, fs.sigma) * inner_k *
                                scale_columns_inv(ft.u, ft.sigma).transposed();

    auto fx = linalg::svd(x_tilde);
    const std::size_t r = std::min(fx.rank(), k);
    const DenseMatrix u = u_basis * fx.u.columns(0, r);
    const DenseMatrix v = gram_multiply(v_basis, fx.v.columns(0, r));
    fx.sigma.resize(r);
    return pad_to_k(u, std::move(fx.sigma), v, k);
}

Factorization one_sided_pipeline(const DenseMatrix& y, const DenseMatrix& z,
                                 const sketch::SketchOperator& s, std::size_t k) {
    const std::size_t m = y.rows();
    const std::size_t n = z.cols();
    const DenseMatrix u_basis = linalg::orthonormal_columns(y);
    if (u_basis.cols() == 0) return zero_factorization(m, n, k);

    const auto fs = linalg::svd(s.apply_left(u_basis));  // S U
    if (fs.rank() == 0) return zero_factorization(m, n, k);

    const DenseMatrix inner = gram_multiply(fs.u, z);  // U~^T Z
    const DenseMatrix inner_k = linalg::truncate_rank_k(inner, k);
    const DenseMatrix w = scale_columns_inv(fs.v, fs.sigma) * inner_k;

    auto fw = linalg::svd(w);
    const std::size_t r = std::min(fw.rank(), k);
    const DenseMatrix u = u_basis * fw.u.columns(0, r);
    fw.sigma.resize(r);
    return pad_to_k(u, std::move(fw.sigma), fw.v.columns(0, r), k);
}

Factorization priv1_finish(const stream::SketchState& state, const Factorization& wide) {
    const std::size_t ni = state.transposed ? state.m : state.n;
    if (wide.degenerate) {
        Factorization f;
        const std::size_t rows = state.transposed ? state.n : state.m;
        f.u = linalg::complete_orthonormal(DenseMatrix(rows, 0), wide.k);
        f.v = linalg::complete_orthonormal(DenseMatrix(ni, 0), wide.k);
        f.sigma.assign(wide.k, 0.0);
        f.k = wide.k;
        f.degenerate = true;
        if (state.transposed) std::swap(f.u, f.v);
        return f;
    }
    // drop the sigma_min augmentation block, then re-orthonormalize exactly
    const DenseMatrix v_restricted = wide.v.top_rows(0, ni);
    auto repaired = linalg::refactor_product(wide.u, wide.sigma, v_restricted);
    Factorization f = pad_to_k(repaired.u, std::move(repaired.sigma), repaired.v, wide.k);
    f.degenerate = false;
    if (state.transposed) std::swap(f.u, f.v);
    return f;
}

void attach_residuals(LrfReport& report, const FactorizeOptions& options, std::size_t k) {
    if (options.reference == nullptr) return;
    const DenseMatrix& a = *options.reference;
    report.residual_fro = linalg::frobenius_norm(a - report.factorization.reconstruct());
    if (options.with_oracle) {
        report.oracle_residual_fro =
            linalg::frobenius_norm(a - linalg::truncate_rank_k(a, k));
        if (*report.oracle_residual_fro > 1e-12)
            report.ratio = *report.residual_fro / *report.oracle_residual_fro;
    }
}

LrfReport factorize(const stream::SketchState& state, std::size_t k,
                    const FactorizeOptions& options) {
    if (k < 1) throw std::invalid_argument("factorize: k must be >= 1");
    if (k > std::min(state.dims.t, state.dims.v))
        throw std::invalid_argument("factorize: k must be <= min(t, v)");
    Stopwatch clock;
    LrfReport report;
    switch (state.mode) {
        case stream::Mode::NonPrivate:
            report.factorization =
                two_sided_pipeline(state.y_c, state.y_r, state.z, *state.s, *state.t_op, k);
            break;
        case stream::Mode::Priv2:
            report.factorization = one_sided_pipeline(state.y_c, state.z, *state.s, k);
            break;
        case stream::Mode::Priv1: {
            const Factorization wide =
                two_sided_pipeline(state.y_c, state.y_r, state.z, *state.s, *state.t_op, k);
            report.factorization = priv1_finish(state, wide);
            break;
        }
    }
    attach_residuals(report, options, k);
    report.wall_time_ms = clock.ms();
    return report;
}

LrfReport factorize_one_sided(const DenseMatrix& y, const DenseMatrix& z,
                              const sketch::SketchOperator& s, std::size_t k,
                              const FactorizeOptions& options) {
    if (k < 1) throw std::invalid_argument("factorize_one_sided: k must be >= 1");
    Stopwatch clock;
    LrfReport report;
    report.factorization = one_sided_pipeline(y, z, s, k);
    attach_residuals(report, options, k);
    report.wall_time_ms = clock.ms();
    return report;
}

}  // namespace sketchlrf::lrf
