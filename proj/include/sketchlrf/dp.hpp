#ifndef SKETCHLRF_DP_HPP
#define SKETCHLRF_DP_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sketchlrf/dp_calibration.hpp"
#include "sketchlrf/lrf.hpp"
#include "sketchlrf/matrix.hpp"
#include "sketchlrf/stream.hpp"

namespace sketchlrf::dp {

/// i.i.d. N(0, std^2) matrix, deterministic in seed.
DenseMatrix gaussian_noise_matrix(std::size_t rows, std::size_t cols, double std,
                                  std::uint64_t seed);

/// Private one-sided factorization (Priv2 state): adds N1 to Y' = A Phi and
/// N2 to Z' = S A at calibrated scale rho, then runs the one-sided pipeline.
/// scales_override is a test hook (zero noise reproduces the non-private path
/// bit for bit).
lrf::LrfReport private_frobenius_lrf(const stream::SketchState& state, std::size_t k,
                                     const PrivacyParams& params, std::uint64_t noise_seed,
                                     const lrf::FactorizeOptions& options = {},
                                     const std::optional<NoiseScales>& scales_override = {});

/// Private two-sided factorization (Priv1 state): adds N1 (std rho1) to
/// Y_r' = Psi A_hat and N2 (std rho2) to Z' = S A_hat T^T, runs the two-sided
/// pipeline on the augmented sketches, and restricts the factors to the
/// original columns.
lrf::LrfReport private_space_optimal_lrf(const stream::SketchState& state, std::size_t k,
                                         const PrivacyParams& params, std::uint64_t noise_seed,
                                         const lrf::FactorizeOptions& options = {},
                                         const std::optional<NoiseScales>& scales_override = {});

struct ChannelStats {
    std::string name;
    double max_sq = 0.0;
    double p95_sq = 0.0;
    std::size_t hard_failures = 0;  // squared norm beyond 1.2 * (1 + alpha)
};

/// Empirical check of the l2-sensitivity premise behind the Gaussian noise:
/// sketches of random neighboring differences stay within (1 + alpha).
/// This audits the premise; it does not prove privacy.
struct AuditReport {
    PrivacyLevel level = PrivacyLevel::Priv2;
    std::size_t trials = 0;
    double alpha = 0.5;
    double bound = 1.5;  // 1 + alpha
    std::vector<ChannelStats> channels;
    bool flagged = false;

    std::string to_json_string() const;
};

AuditReport sensitivity_audit(const stream::SketchState& state, std::size_t trials,
                              std::uint64_t seed);

/// Homogeneous adaptive composition: all budgets must be equal.
/// Returns (sqrt(2 l ln(1/delta')) eps0 + 2 l eps0^2, l delta0 + delta').
std::pair<double, double> compose(const std::vector<std::pair<double, double>>& budgets,
                                  double delta_prime);

/// Shape of the additive residual term for the private pipelines, with unit
/// leading constant and the noise-tail quantile fixed at l = 2. Reports echo
/// this next to measured residuals; scaling (not absolute value) is the
/// meaningful comparison.
double additive_envelope(const PrivacyParams& params, const NoiseScales& scales,
                         std::size_t m, std::size_t n, std::size_t k, std::size_t v);

}  // namespace sketchlrf::dp

#endif  // SKETCHLRF_DP_HPP
