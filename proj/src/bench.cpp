#include "sketchlrf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sketchlrf/dp.hpp"
#include "sketchlrf/lrf.hpp"
#include "sketchlrf/rng.hpp"

namespace sketchlrf::bench {

namespace {

constexpr std::uint64_t kTagGen = 0x67656eULL;
constexpr std::uint64_t kTagGen2 = 0x67326eULL;
constexpr std::uint64_t kTagGenNoise = 0x676e6fULL;
constexpr std::uint64_t kTagSketchSeed = 0x736b74ULL;
constexpr std::uint64_t kTagNoiseSeed = 0x6e7a65ULL;
constexpr std::uint64_t kTagShuffle = 0x736866ULL;

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

DenseMatrix gen_lowrank_plus_noise(std::size_t m, std::size_t n, std::size_t r,
                                   double noise_level, std::uint64_t seed) {
    if (r > std::min(m, n))
        throw std::invalid_argument("gen_lowrank_plus_noise: r must be <= min(m, n)");
    if (noise_level < 0.0)
        throw std::invalid_argument("gen_lowrank_plus_noise: noise_level must be >= 0");
    const std::uint64_t s1 = rng::derive(seed, kTagGen);
    const std::uint64_t s2 = rng::derive(seed, kTagGen2);
    const std::uint64_t s3 = rng::derive(seed, kTagGenNoise);
    DenseMatrix g1(m, r), g2(n, r);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < r; ++j) g1(i, j) = rng::gaussian(s1, i * r + j);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < r; ++j) g2(i, j) = rng::gaussian(s2, i * r + j);
    DenseMatrix a = multiply_bt(g1, g2);
    if (noise_level > 0.0) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                a(i, j) += noise_level * rng::gaussian(s3, i * n + j);
    }
    return a;
}

void emit_stream(const DenseMatrix& a, StreamOrder order, const std::string& path,
                 std::uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write stream file: " + path);
    out << "% " << a.rows() << ' ' << a.cols() << '\n';
    std::vector<std::size_t> cells;
    cells.reserve(a.size());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (a(i, j) != 0.0) cells.push_back(i * a.cols() + j);
    if (order == StreamOrder::Random) {
        const std::uint64_t ss = rng::derive(seed, kTagShuffle);
        for (std::size_t i = cells.size(); i > 1; --i) {
            const std::size_t j = rng::below(ss, i, i);
            std::swap(cells[i - 1], cells[j]);
        }
    }
    char buf[64];
    for (const std::size_t cell : cells) {
        const std::size_t i = cell / a.cols();
        const std::size_t j = cell % a.cols();
        std::snprintf(buf, sizeof buf, "%.17g", a(i, j));
        out << i << ' ' << j << ' ' << buf << '\n';
    }
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
    if (m < 1 || n < 1 || k < 1)
        throw std::invalid_argument("ExperimentConfig: m, n, k must be >= 1");
    if (mode != stream::Mode::NonPrivate && (!epsilon.has_value() || !delta.has_value()))
        throw std::invalid_argument("ExperimentConfig: private mode needs epsilon and delta");
    if (mode == stream::Mode::NonPrivate && (epsilon.has_value() || delta.has_value()))
        throw std::invalid_argument("ExperimentConfig: epsilon/delta given for nonprivate mode");
    if (gen_rank > std::min(m, n))
        throw std::invalid_argument("ExperimentConfig: gen_rank must be <= min(m, n)");
}

dp::PrivacyParams ExperimentConfig::privacy_params() const {
    dp::PrivacyParams p;
    p.epsilon = epsilon.value();
    p.delta = delta.value();
    p.alpha = alpha;
    p.level = mode == stream::Mode::Priv1 ? dp::PrivacyLevel::Priv1 : dp::PrivacyLevel::Priv2;
    return p;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const bool use_oracle = cfg.oracle && cfg.m * cfg.n <= cfg.oracle_cap;
    std::optional<dp::PrivacyParams> privacy;
    if (cfg.mode != stream::Mode::NonPrivate) privacy = cfg.privacy_params();

    stream::InitOptions init_options;
    init_options.regression_kind = cfg.regression_kind;
    init_options.affine_kind = cfg.affine_kind;
    init_options.constant_c = cfg.constant_c;

    ExperimentResult result;
    result.records.reserve(cfg.trials);
    dp::NoiseScales scales_echo;
    sketch::EmbeddingDims dims_echo;

    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
        const std::uint64_t trial_seed = cfg.seed + trial;
        const DenseMatrix a = gen_lowrank_plus_noise(cfg.m, cfg.n, cfg.gen_rank,
                                                     cfg.gen_noise_level, trial_seed);

        auto state = stream::init_state(cfg.m, cfg.n, cfg.k, cfg.alpha,
                                        rng::derive(trial_seed, kTagSketchSeed), cfg.mode,
                                        privacy, init_options);
        scales_echo = state.scales;
        dims_echo = state.dims;

        const auto ingest_start = std::chrono::steady_clock::now();
        stream::ingest_matrix(state, a);
        const double ingest_ns = std::chrono::duration<double, std::nano>(
                                     std::chrono::steady_clock::now() - ingest_start)
                                     .count();

        lrf::FactorizeOptions fopts;
        fopts.reference = &a;
        fopts.with_oracle = use_oracle;
        lrf::LrfReport report;
        switch (cfg.mode) {
            case stream::Mode::NonPrivate:
                report = lrf::factorize(state, cfg.k, fopts);
                break;
            case stream::Mode::Priv2:
                report = dp::private_frobenius_lrf(state, cfg.k, *privacy,
                                                   rng::derive(trial_seed, kTagNoiseSeed),
                                                   fopts);
                break;
            case stream::Mode::Priv1:
                report = dp::private_space_optimal_lrf(state, cfg.k, *privacy,
                                                       rng::derive(trial_seed, kTagNoiseSeed),
                                                       fopts);
                break;
        }

        TrialRecord rec;
        rec.seed = trial_seed;
        rec.residual_fro = report.residual_fro.value();
        rec.oracle_residual_fro = report.oracle_residual_fro;
        rec.ratio = report.ratio;
        if (report.ratio) {
            rec.additive_excess = std::max(
                0.0, rec.residual_fro - (1.0 + cfg.alpha) * *report.oracle_residual_fro);
        }
        rec.update_cost_ns =
            state.updates_seen ? ingest_ns / static_cast<double>(state.updates_seen) : 0.0;
        rec.factorize_ms = report.wall_time_ms;
        result.records.push_back(std::move(rec));
    }

    // order-stable: records are already sorted by seed
    ExperimentSummary& s = result.summary;
    s.trials = cfg.trials;
    s.scales = scales_echo;
    if (privacy) {
        s.additive_envelope =
            dp::additive_envelope(*privacy, scales_echo, cfg.m, cfg.n, cfg.k, dims_echo.v);
    }
    std::vector<double> residuals, excesses, update_ns, fact_ms;
    std::size_t ok = 0;
    for (const auto& r : result.records) {
        residuals.push_back(r.residual_fro);
        update_ns.push_back(r.update_cost_ns);
        fact_ms.push_back(r.factorize_ms);
        if (r.ratio) {
            ++s.ratio_defined;
            if (*r.ratio <= 1.0 + cfg.alpha) ++ok;
            excesses.push_back(r.additive_excess);
        }
    }
    s.success_rate =
        s.ratio_defined ? static_cast<double>(ok) / static_cast<double>(s.ratio_defined) : 0.0;
    s.median_additive_excess = percentile(excesses, 0.5);
    s.median_residual = percentile(residuals, 0.5);
    s.update_cost_ns_p50 = percentile(update_ns, 0.5);
    s.update_cost_ns_p90 = percentile(update_ns, 0.9);
    s.factorize_ms_p50 = percentile(fact_ms, 0.5);
    s.factorize_ms_p90 = percentile(fact_ms, 0.9);
    return result;
}

std::string ExperimentResult::to_json_string(const ExperimentConfig& cfg,
                                             bool with_timings) const {
    nlohmann::json j;
    j["schema"] = 1;
    j["config"] = {{"m", cfg.m},
                   {"n", cfg.n},
                   {"k", cfg.k},
                   {"alpha", cfg.alpha},
                   {"mode", stream::mode_name(cfg.mode)},
                   {"trials", cfg.trials},
                   {"seed", cfg.seed},
                   {"c", cfg.constant_c},
                   {"regression_kind", sketch::kind_name(cfg.regression_kind)},
                   {"affine_kind", sketch::kind_name(cfg.affine_kind)},
                   {"gen_rank", cfg.gen_rank},
                   {"gen_noise_level", cfg.gen_noise_level},
                   {"oracle", cfg.oracle}};
    if (cfg.epsilon) j["config"]["epsilon"] = *cfg.epsilon;
    if (cfg.delta) j["config"]["delta"] = *cfg.delta;
    j["noise_scales"] = {{"rho", summary.scales.rho},
                         {"rho1", summary.scales.rho1},
                         {"rho2", summary.scales.rho2},
                         {"sigma_min", summary.scales.sigma_min}};
    j["summary"] = {{"trials", summary.trials},
                    {"ratio_defined", summary.ratio_defined},
                    {"success_rate", summary.success_rate},
                    {"median_additive_excess", summary.median_additive_excess},
                    {"median_residual", summary.median_residual},
                    {"additive_envelope", summary.additive_envelope}};
    j["trials"] = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json tr{{"seed", r.seed},
                          {"residual_fro", r.residual_fro},
                          {"additive_excess", r.additive_excess}};
        if (r.oracle_residual_fro) tr["oracle_residual_fro"] = *r.oracle_residual_fro;
        if (r.ratio) tr["ratio"] = *r.ratio;
        if (with_timings) {
            tr["update_cost_ns"] = r.update_cost_ns;
            tr["factorize_ms"] = r.factorize_ms;
        }
        j["trials"].push_back(std::move(tr));
    }
    if (with_timings) {
        j["timing"] = {{"update_cost_ns_p50", summary.update_cost_ns_p50},
                       {"update_cost_ns_p90", summary.update_cost_ns_p90},
                       {"factorize_ms_p50", summary.factorize_ms_p50},
                       {"factorize_ms_p90", summary.factorize_ms_p90}};
    }
    return j.dump(2);
}

bool ExperimentResult::passes(const ExperimentConfig& cfg) const {
    if (!cfg.min_success_rate) return true;
    return summary.success_rate >= *cfg.min_success_rate;
}

}  // namespace sketchlrf::bench
