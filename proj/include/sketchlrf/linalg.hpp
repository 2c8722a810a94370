#ifndef SKETCHLRF_LINALG_HPP
#define SKETCHLRF_LINALG_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sketchlrf/matrix.hpp"

namespace sketchlrf::linalg {

/// Thin SVD with factors truncated at numerical rank: u (rows x r),
/// sigma nonincreasing of length r, v (cols x r).
struct Svd {
    DenseMatrix u;
    std::vector<double> sigma;
    DenseMatrix v;

    std::size_t rank() const { return sigma.size(); }
};

struct SvdConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Orthonormal basis of the column space, via Householder QR. Dependent
/// columns are dropped, so the column count equals the numerical rank.
DenseMatrix orthonormal_columns(const DenseMatrix& a);

/// Orthonormal basis of the row space, returned as a matrix with
/// orthonormal rows (rank x cols).
DenseMatrix orthonormal_rows(const DenseMatrix& a);

/// One-sided Jacobi SVD (cyclic sweeps, 60-sweep cap). Throws
/// SvdConvergenceError if the sweep cap is hit before convergence.
Svd svd(const DenseMatrix& a);

/// Moore-Penrose pseudo-inverse. tol = 0 selects the default
/// max(rows,cols) * eps * sigma_max cutoff.
DenseMatrix pinv(const DenseMatrix& a, double tol = 0.0);

/// Best rank-k approximation [a]_k. k >= rank(a) returns a unchanged.
/// When sigma_k == sigma_{k+1} the result keeps the first k directions in
/// the SVD's returned order and is not unique; compare residual norms, not
/// factors.
DenseMatrix truncate_rank_k(const DenseMatrix& a, std::size_t k);

double frobenius_norm(const DenseMatrix& a);
double spectral_norm(const DenseMatrix& a);

/// Reconstruct u * diag(sigma) * v^T.
DenseMatrix svd_product(const DenseMatrix& u, const std::vector<double>& sigma,
                        const DenseMatrix& v);

/// Extend a matrix with orthonormal columns to `want` columns by appending
/// vectors orthogonal to the existing ones (coordinate vectors, re-orthonormalized).
DenseMatrix complete_orthonormal(const DenseMatrix& q, std::size_t want);

/// Exact re-factorization of p * diag(sigma) * q^T at rank k, for factors that
/// are no longer orthonormal. Returns orthonormal u, nonincreasing sigma, v.
Svd refactor_product(const DenseMatrix& p, const std::vector<double>& sigma,
                     const DenseMatrix& q);

}  // namespace sketchlrf::linalg

#endif  // SKETCHLRF_LINALG_HPP
