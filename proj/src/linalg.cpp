#include "sketchlrf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sketchlrf/rng.hpp"

namespace sketchlrf::linalg {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxJacobiSweeps = 60;
constexpr double kJacobiTol = 1e-12;

double column_dot(const DenseMatrix& m, std::size_t p, std::size_t q) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, p) * m(i, q);
    return s;
}

void rotate_columns(DenseMatrix& m, std::size_t p, std::size_t q, double c, double s) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double xp = m(i, p);
        const double xq = m(i, q);
        m(i, p) = c * xp - s * xq;
        m(i, q) = s * xp + c * xq;
    }
}

// Jacobi sweeps on the columns of g, accumulating rotations into v.
// Returns false if the sweep cap was exhausted before convergence.
bool jacobi_orthogonalize(DenseMatrix& g, DenseMatrix& v) {
    const std::size_t n = g.cols();
    if (n < 2) return true;
    // columns below eps * ||G||_F carry only rounding residue; they end up
    // under the rank cutoff, and rotating them can cycle forever
    double total = 0.0;
    for (double x : g.data()) total += x * x;
    const double dead = kEps * kEps * total;
    for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double app = column_dot(g, p, p);
                const double aqq = column_dot(g, q, q);
                if (app <= dead || aqq <= dead) continue;
                const double apq = column_dot(g, p, q);
                if (std::abs(apq) <= kJacobiTol * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_columns(g, p, q, c, s);
                rotate_columns(v, p, q, c, s);
            }
        }
        if (!rotated) return true;
    }
    return false;
}

Svd svd_tall(const DenseMatrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    DenseMatrix g = a;
    DenseMatrix v = DenseMatrix::identity(n);
    if (!jacobi_orthogonalize(g, v)) {
        throw SvdConvergenceError("svd: Jacobi sweeps did not converge within cap");
    }

    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(column_dot(g, j, j));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return norms[i] > norms[j]; });

    const double sigma_max = n ? norms[order[0]] : 0.0;
    const double cutoff = static_cast<double>(std::max(m, n)) * kEps * sigma_max;
    std::size_t r = 0;
    while (r < n && norms[order[r]] > cutoff && norms[order[r]] > 0.0) ++r;

    Svd out;
    out.u = DenseMatrix(m, r);
    out.v = DenseMatrix(n, r);
    out.sigma.resize(r);
    for (std::size_t k = 0; k < r; ++k) {
        const std::size_t j = order[k];
        out.sigma[k] = norms[j];
        const double inv = 1.0 / norms[j];
        for (std::size_t i = 0; i < m; ++i) out.u(i, k) = g(i, j) * inv;
        for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
    }
    return out;
}

struct Reflector {
    std::size_t offset;       // first row the reflector acts on
    std::vector<double> v;    // Householder vector, v[0] = 1
    double beta;
};

void apply_reflector_to_column(const Reflector& h, DenseMatrix& m, std::size_t col) {
    double dot = 0.0;
    for (std::size_t i = 0; i < h.v.size(); ++i) dot += h.v[i] * m(h.offset + i, col);
    const double bd = h.beta * dot;
    for (std::size_t i = 0; i < h.v.size(); ++i) m(h.offset + i, col) -= bd * h.v[i];
}

}  // namespace

DenseMatrix orthonormal_columns(const DenseMatrix& a) {
    if (a.cols() == 0) throw std::invalid_argument("orthonormal_columns: needs >= 1 column");
    if (!a.all_finite()) throw std::invalid_argument("orthonormal_columns: non-finite input");

    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    const double drop = static_cast<double>(std::max(m, n)) * kEps * frobenius_norm(a);

    DenseMatrix r = a;
    std::vector<Reflector> reflectors;
    std::size_t pivot = 0;
    for (std::size_t j = 0; j < n && pivot < m; ++j) {
        double tail = 0.0;
        for (std::size_t i = pivot; i < m; ++i) tail += r(i, j) * r(i, j);
        tail = std::sqrt(tail);
        if (tail <= drop) continue;  // dependent column

        Reflector h;
        h.offset = pivot;
        h.v.assign(m - pivot, 0.0);
        const double x0 = r(pivot, j);
        const double alpha = (x0 >= 0.0 ? -tail : tail);
        h.v[0] = x0 - alpha;
        for (std::size_t i = pivot + 1; i < m; ++i) h.v[i - pivot] = r(i, j);
        double vnorm2 = 0.0;
        for (double x : h.v) vnorm2 += x * x;
        const double v0 = h.v[0];
        for (double& x : h.v) x /= v0;
        h.beta = 2.0 * v0 * v0 / vnorm2;
        for (std::size_t col = j; col < n; ++col) apply_reflector_to_column(h, r, col);
        reflectors.push_back(std::move(h));
        ++pivot;
    }

    const std::size_t rank = reflectors.size();
    DenseMatrix q(m, rank);
    for (std::size_t k = 0; k < rank; ++k) q(k, k) = 1.0;
    for (std::size_t rev = reflectors.size(); rev-- > 0;) {
        for (std::size_t col = 0; col < rank; ++col) {
            apply_reflector_to_column(reflectors[rev], q, col);
        }
    }
    return q;
}

DenseMatrix orthonormal_rows(const DenseMatrix& a) {
    return orthonormal_columns(a.transposed()).transposed();
}

Svd svd(const DenseMatrix& a) {
    if (a.empty()) {
        Svd out;
        out.u = DenseMatrix(a.rows(), 0);
        out.v = DenseMatrix(a.cols(), 0);
        return out;
    }
    if (!a.all_finite()) throw std::invalid_argument("svd: non-finite input");
    if (a.rows() >= a.cols()) return svd_tall(a);
    Svd t = svd_tall(a.transposed());
    std::swap(t.u, t.v);
    return t;
}

DenseMatrix pinv(const DenseMatrix& a, double tol) {
    if (tol < 0.0) throw std::invalid_argument("pinv: tol must be >= 0");
    const Svd f = svd(a);
    const double sigma_max = f.sigma.empty() ? 0.0 : f.sigma.front();
    const double cutoff =
        tol > 0.0 ? tol
                  : static_cast<double>(std::max(a.rows(), a.cols())) * kEps * sigma_max;
    DenseMatrix out(a.cols(), a.rows());
    for (std::size_t k = 0; k < f.rank(); ++k) {
        if (f.sigma[k] <= cutoff) break;
        const double inv = 1.0 / f.sigma[k];
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double vik = f.v(i, k) * inv;
            if (vik == 0.0) continue;
            for (std::size_t j = 0; j < a.rows(); ++j) out(i, j) += vik * f.u(j, k);
        }
    }
    return out;
}

DenseMatrix truncate_rank_k(const DenseMatrix& a, std::size_t k) {
    if (k < 1) throw std::invalid_argument("truncate_rank_k: k must be >= 1");
    const Svd f = svd(a);
    if (k >= f.rank()) return a;
    DenseMatrix uk = f.u.columns(0, k);
    DenseMatrix vk = f.v.columns(0, k);
    std::vector<double> sk(f.sigma.begin(), f.sigma.begin() + static_cast<std::ptrdiff_t>(k));
    return svd_product(uk, sk, vk);
}

double frobenius_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    return std::sqrt(s);
}

double spectral_norm(const DenseMatrix& a) {
    if (a.empty()) return 0.0;
    const Svd f = svd(a);
    return f.sigma.empty() ? 0.0 : f.sigma.front();
}

DenseMatrix svd_product(const DenseMatrix& u, const std::vector<double>& sigma,
                        const DenseMatrix& v) {
    DenseMatrix us = u;
    for (std::size_t i = 0; i < us.rows(); ++i)
        for (std::size_t k = 0; k < us.cols(); ++k) us(i, k) *= sigma[k];
    return multiply_bt(us, v);
}

DenseMatrix complete_orthonormal(const DenseMatrix& q, std::size_t want) {
    const std::size_t m = q.rows();
    if (want > m) throw std::invalid_argument("complete_orthonormal: want > rows");
    if (q.cols() >= want) return q.cols() == want ? q : q.columns(0, want);

    DenseMatrix out(m, want);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < q.cols(); ++j) out(i, j) = q(i, j);

    std::size_t have = q.cols();
    // coordinate vectors first, then deterministic Gaussian candidates when
    // the complement is too thin for any coordinate direction to stand out
    auto try_candidate = [&](std::vector<double> w, double floor) {
        // two rounds of Gram-Schmidt against the accepted columns
        for (int round = 0; round < 2; ++round) {
            for (std::size_t j = 0; j < have; ++j) {
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += w[i] * out(i, j);
                for (std::size_t i = 0; i < m; ++i) w[i] -= dot * out(i, j);
            }
        }
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < floor) return false;
        for (std::size_t i = 0; i < m; ++i) out(i, have) = w[i] / norm;
        ++have;
        return true;
    };
    for (std::size_t cand = 0; cand < m && have < want; ++cand) {
        std::vector<double> w(m, 0.0);
        w[cand] = 1.0;
        try_candidate(std::move(w), 0.5);
    }
    for (std::size_t cand = 0; cand < 4 * m && have < want; ++cand) {
        std::vector<double> w(m);
        for (std::size_t i = 0; i < m; ++i)
            w[i] = rng::gaussian(0x6f72746842617365ULL + cand, i);
        try_candidate(std::move(w), 1e-6);
    }
    if (have < want) throw std::runtime_error("complete_orthonormal: failed to complete basis");
    return out;
}

Svd refactor_product(const DenseMatrix& p, const std::vector<double>& sigma,
                     const DenseMatrix& q) {
    const std::size_t k = sigma.size();
    DenseMatrix ps = p;
    for (std::size_t i = 0; i < ps.rows(); ++i)
        for (std::size_t j = 0; j < k; ++j) ps(i, j) *= sigma[j];

    if (k == 0) {
        Svd out;
        out.u = DenseMatrix(p.rows(), 0);
        out.v = DenseMatrix(q.rows(), 0);
        return out;
    }

    const DenseMatrix qp = orthonormal_columns(ps);
    const DenseMatrix qq = orthonormal_columns(q);
    // core = qp^T * (p diag(sigma)) * (qq^T q)^T, small k' x k''
    const DenseMatrix core = gram_multiply(qp, ps) * gram_multiply(q, qq);
    Svd f = svd(core);
    Svd out;
    out.u = qp * f.u;
    out.v = qq * f.v;
    out.sigma = std::move(f.sigma);
    return out;
}

}  // namespace sketchlrf::linalg
