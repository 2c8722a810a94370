#ifndef SKETCHLRF_DP_CALIBRATION_HPP
#define SKETCHLRF_DP_CALIBRATION_HPP

#include <cstddef>

#include "sketchlrf/sketch.hpp"

namespace sketchlrf::dp {

using sketch::PrivacyLevel;

/// Privacy budget plus the approximation parameter that enters the noise
/// formulas. Neighboring granularity: Priv1 differs by a unit rank-one
/// update, Priv2 by any unit-Frobenius-norm matrix.
struct PrivacyParams {
    double epsilon = 1.0;
    double delta = 1e-6;
    PrivacyLevel level = PrivacyLevel::Priv2;
    double alpha = 0.5;
};

/// Noise standard deviations and the singular-value floor, exact functions
/// of PrivacyParams (and t for Priv1).
struct NoiseScales {
    double rho = 0.0;        // Priv2
    double rho1 = 0.0;       // Priv1, N1
    double rho2 = 0.0;       // Priv1, N2
    double sigma_min = 0.0;  // Priv1 augmentation floor
};

enum class LogBase { Natural, Two };

/// Evaluate the noise calibration formulas. t is the regression-embedding
/// dimension and is only consumed by the Priv1 sigma_min term. The log in
/// sigma_min's leading factor is taken in `base` (natural by default).
NoiseScales calibrate(const PrivacyParams& params, std::size_t t,
                      LogBase base = LogBase::Natural);

void validate(const PrivacyParams& params);

}  // namespace sketchlrf::dp

#endif  // SKETCHLRF_DP_CALIBRATION_HPP
