#ifndef SKETCHLRF_BENCH_HPP
#define SKETCHLRF_BENCH_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sketchlrf/dp_calibration.hpp"
#include "sketchlrf/matrix.hpp"
#include "sketchlrf/sketch.hpp"
#include "sketchlrf/stream.hpp"

namespace sketchlrf::bench {

/// Synthetic input: A = G1 G2^T + noise_level * G3 with standard Gaussian
/// factors, deterministic in seed.
DenseMatrix gen_lowrank_plus_noise(std::size_t m, std::size_t n, std::size_t r,
                                   double noise_level, std::uint64_t seed);

enum class StreamOrder { RowMajor, Random };

/// Write the nonzero entries of a as a turnstile stream file.
void emit_stream(const DenseMatrix& a, StreamOrder order, const std::string& path,
                 std::uint64_t seed);

struct ExperimentConfig {
    std::size_t m = 64;
    std::size_t n = 48;
    std::size_t k = 5;
    double alpha = 0.5;
    stream::Mode mode = stream::Mode::NonPrivate;
    std::optional<double> epsilon;
    std::optional<double> delta;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    sketch::Kind regression_kind = sketch::Kind::CountSketch;
    sketch::Kind affine_kind = sketch::Kind::CountSketch;
    double constant_c = 4.0;
    std::size_t gen_rank = 5;
    double gen_noise_level = 0.05;
    bool oracle = true;
    std::size_t oracle_cap = 1'000'000;  // skip the exact oracle when m*n exceeds this
    std::optional<double> min_success_rate;

    void validate() const;
    dp::PrivacyParams privacy_params() const;
};

struct TrialRecord {
    std::uint64_t seed = 0;
    double residual_fro = 0.0;
    std::optional<double> oracle_residual_fro;
    std::optional<double> ratio;  // undefined when the oracle residual is < 1e-12
    double additive_excess = 0.0;
    double update_cost_ns = 0.0;
    double factorize_ms = 0.0;
};

struct ExperimentSummary {
    std::size_t trials = 0;
    std::size_t ratio_defined = 0;
    double success_rate = 0.0;          // fraction of ratios <= 1 + alpha
    double median_additive_excess = 0.0;
    double median_residual = 0.0;
    double update_cost_ns_p50 = 0.0;
    double update_cost_ns_p90 = 0.0;
    double factorize_ms_p50 = 0.0;
    double factorize_ms_p90 = 0.0;
    dp::NoiseScales scales;          // echoed for auditability (zeros when non-private)
    double additive_envelope = 0.0;  // unit-constant envelope shape, private modes only
};

struct ExperimentResult {
    std::vector<TrialRecord> records;
    ExperimentSummary summary;

    /// Deterministic modulo the timing block; with_timings = false drops it,
    /// making the output byte-identical for identical (config, seed).
    std::string to_json_string(const ExperimentConfig& cfg, bool with_timings = true) const;
    bool passes(const ExperimentConfig& cfg) const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace sketchlrf::bench

#endif  // SKETCHLRF_BENCH_HPP
