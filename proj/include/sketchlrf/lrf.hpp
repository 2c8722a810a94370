#ifndef SKETCHLRF_LRF_HPP
#define SKETCHLRF_LRF_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include "sketchlrf/linalg.hpp"
#include "sketchlrf/matrix.hpp"
#include "sketchlrf/sketch.hpp"
#include "sketchlrf/stream.hpp"

namespace sketchlrf::lrf {

/// Rank-k factorization with orthonormal factors and nonincreasing
/// singular values (zero-padded past the effective rank).
struct Factorization {
    DenseMatrix u;              // m x k
    std::vector<double> sigma;  // length k
    DenseMatrix v;              // n x k
    std::size_t k = 0;
    std::size_t effective_rank = 0;
    bool degenerate = false;  // all-zero sketches

    DenseMatrix reconstruct() const { return linalg::svd_product(u, sigma, v); }
};

struct LrfReport {
    Factorization factorization;
    std::optional<double> residual_fro;         // ||A - M_k||_F, needs the reference
    std::optional<double> oracle_residual_fro;  // ||A - [A]_k||_F
    std::optional<double> ratio;                // residual / oracle, if oracle > 1e-12
    double wall_time_ms = 0.0;
};

struct FactorizeOptions {
    /// When set, residual_fro is computed against this matrix.
    const DenseMatrix* reference = nullptr;
    /// Also materialize the exact rank-k oracle (requires reference).
    bool with_oracle = false;
};

/// argmin over rank-<=k X of ||o X - z||_F, for o with orthonormal columns.
DenseMatrix rank_k_under_basis(const DenseMatrix& o, const DenseMatrix& z, std::size_t k);

/// argmin over rank-<=k X of ||c X r - f||_F, for orthonormal columns c and
/// orthonormal rows r.
DenseMatrix rank_k_between_bases(const DenseMatrix& c, const DenseMatrix& r,
                                 const DenseMatrix& f, std::size_t k);

/// Sketch-and-solve generalized regression: (Phi p)^+ (Phi q).
DenseMatrix sketched_regression(const DenseMatrix& p, const DenseMatrix& q,
                                const sketch::SketchOperator& phi);

/// Shared reconstruction cores. Both return factors at the requested k,
/// zero-padding trailing singular values when the effective rank is lower.
Factorization two_sided_pipeline(const DenseMatrix& y_c, const DenseMatrix& y_r,
                                 const DenseMatrix& z, const sketch::SketchOperator& s,
                                 const sketch::SketchOperator& t_op, std::size_t k);
Factorization one_sided_pipeline(const DenseMatrix& y, const DenseMatrix& z,
                                 const sketch::SketchOperator& s, std::size_t k);

/// Noiseless factorization of a quiesced state, dispatching on its mode.
/// For Priv1 states this includes the augmentation restriction; privacy noise
/// is NOT added here (that is the dp layer's job).
LrfReport factorize(const stream::SketchState& state, std::size_t k,
                    const FactorizeOptions& options = {});

/// One-pass one-sided reconstruction from y = A Phi and z = S A.
LrfReport factorize_one_sided(const DenseMatrix& y, const DenseMatrix& z,
                              const sketch::SketchOperator& s, std::size_t k,
                              const FactorizeOptions& options = {});

/// Finish a Priv1 two-sided factorization: drop the augmentation rows from
/// the wide factor, re-orthonormalize exactly, and undo the internal
/// transposition. Exposed for the dp layer.
Factorization priv1_finish(const stream::SketchState& state, const Factorization& wide);

/// Fill residual/oracle/ratio fields from a reference matrix.
void attach_residuals(LrfReport& report, const FactorizeOptions& options, std::size_t k);

}  // namespace sketchlrf::lrf

#endif  // SKETCHLRF_LRF_HPP
