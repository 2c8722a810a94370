#include "sketchlrf/dp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sketchlrf/rng.hpp"

namespace sketchlrf::dp {

namespace {

constexpr std::uint64_t kTagNoise1 = 0x6e31ULL;
constexpr std::uint64_t kTagNoise2 = 0x6e32ULL;
constexpr std::uint64_t kTagAuditU = 0x6175ULL;
constexpr std::uint64_t kTagAuditV = 0x6176ULL;
constexpr std::uint64_t kTagAuditE = 0x6165ULL;

double log_base(double x, LogBase base) {
    return base == LogBase::Natural ? std::log(x) : std::log2(x);
}

void add_in_place(DenseMatrix& target, const DenseMatrix& noise) {
    for (std::size_t i = 0; i < target.size(); ++i) target.data()[i] += noise.data()[i];
}

double fro2_of_vector(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

std::vector<double> apply_to_vector(const sketch::SketchOperator& op,
                                    const std::vector<double>& x) {
    DenseMatrix col(x.size(), 1);
    for (std::size_t i = 0; i < x.size(); ++i) col(i, 0) = x[i];
    const DenseMatrix y = op.apply_left(col);
    std::vector<double> out(y.rows());
    for (std::size_t i = 0; i < y.rows(); ++i) out[i] = y(i, 0);
    return out;
}

struct ChannelAccumulator {
    std::string name;
    std::vector<double> squared;

    void add(double sq) { squared.push_back(sq); }

    ChannelStats finalize(double hard_cap) {
        ChannelStats cs;
        cs.name = name;
        std::sort(squared.begin(), squared.end());
        cs.max_sq = squared.empty() ? 0.0 : squared.back();
        if (!squared.empty()) {
            const std::size_t idx =
                std::min(squared.size() - 1,
                         static_cast<std::size_t>(
                             std::ceil(0.95 * static_cast<double>(squared.size())) - 1));
            cs.p95_sq = squared[idx];
        }
        for (double sq : squared)
            if (sq > hard_cap) ++cs.hard_failures;
        return cs;
    }
};

}  // namespace

void validate(const PrivacyParams& params) {
    if (!(params.epsilon > 0.0))
        throw std::invalid_argument("PrivacyParams: epsilon must be > 0");
    if (!(params.delta > 0.0 && params.delta < 1.0))
        throw std::invalid_argument("PrivacyParams: delta must be in (0, 1)");
    if (!(params.alpha > 0.0 && params.alpha <= 1.0))
        throw std::invalid_argument("PrivacyParams: alpha must be in (0, 1]");
}

NoiseScales calibrate(const PrivacyParams& params, std::size_t t, LogBase base) {
    validate(params);
    const double alpha = params.alpha;
    const double eps = params.epsilon;
    const double ln_delta = std::log(1.0 / params.delta);
    NoiseScales out;
    if (params.level == PrivacyLevel::Priv2) {
        out.rho = std::sqrt((1.0 + alpha) * ln_delta) / eps;
        return out;
    }
    if (alpha >= 1.0)
        throw std::invalid_argument("calibrate: Priv1 requires alpha < 1");
    if (t < 1) throw std::invalid_argument("calibrate: Priv1 requires t >= 1");
    out.rho1 = std::sqrt((1.0 + alpha) * ln_delta) / eps;
    out.rho2 = (1.0 + alpha) * std::sqrt(ln_delta) / eps;
    out.sigma_min = 16.0 * log_base(1.0 / params.delta, base) *
                    std::sqrt(static_cast<double>(t) * (1.0 + alpha) / (1.0 - alpha) *
                              ln_delta) /
                    eps;
    return out;
}

DenseMatrix gaussian_noise_matrix(std::size_t rows, std::size_t cols, double std,
                                  std::uint64_t seed) {
    if (std < 0.0) throw std::invalid_argument("gaussian_noise_matrix: std must be >= 0");
    DenseMatrix m(rows, cols);
    if (std == 0.0) return m;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(i, j) = std * rng::gaussian(seed, i * cols + j);
    return m;
}

lrf::LrfReport private_frobenius_lrf(const stream::SketchState& state, std::size_t k,
                                     const PrivacyParams& params, std::uint64_t noise_seed,
                                     const lrf::FactorizeOptions& options,
                                     const std::optional<NoiseScales>& scales_override) {
    if (state.mode != stream::Mode::Priv2)
        throw std::invalid_argument("private_frobenius_lrf: state is not Priv2");
    if (!state.privacy.has_value())
        throw std::invalid_argument("private_frobenius_lrf: state has no privacy params");
    const NoiseScales scales =
        scales_override ? *scales_override : calibrate(params, state.dims.t);

    const auto start = std::chrono::steady_clock::now();
    DenseMatrix y = state.y_c;
    add_in_place(y, gaussian_noise_matrix(y.rows(), y.cols(), scales.rho,
                                          rng::derive(noise_seed, kTagNoise1)));
    DenseMatrix z = state.z;
    add_in_place(z, gaussian_noise_matrix(z.rows(), z.cols(), scales.rho,
                                          rng::derive(noise_seed, kTagNoise2)));

    lrf::LrfReport report;
    report.factorization = lrf::one_sided_pipeline(y, z, *state.s, k);
    lrf::attach_residuals(report, options, k);
    report.wall_time_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
    return report;
}

lrf::LrfReport private_space_optimal_lrf(const stream::SketchState& state, std::size_t k,
                                         const PrivacyParams& params, std::uint64_t noise_seed,
                                         const lrf::FactorizeOptions& options,
                                         const std::optional<NoiseScales>& scales_override) {
    if (state.mode != stream::Mode::Priv1)
        throw std::invalid_argument("private_space_optimal_lrf: state is not Priv1");
    if (!state.privacy.has_value())
        throw std::invalid_argument("private_space_optimal_lrf: state has no privacy params");
    const NoiseScales scales =
        scales_override ? *scales_override : calibrate(params, state.dims.t);
    if (!scales_override && scales.sigma_min != state.scales.sigma_min)
        throw std::invalid_argument(
            "private_space_optimal_lrf: params disagree with the state's sigma_min floor");

    const auto start = std::chrono::steady_clock::now();
    DenseMatrix y_r = state.y_r;
    add_in_place(y_r, gaussian_noise_matrix(y_r.rows(), y_r.cols(), scales.rho1,
                                            rng::derive(noise_seed, kTagNoise1)));
    DenseMatrix z = state.z;
    add_in_place(z, gaussian_noise_matrix(z.rows(), z.cols(), scales.rho2,
                                          rng::derive(noise_seed, kTagNoise2)));

    lrf::LrfReport report;
    const lrf::Factorization wide =
        lrf::two_sided_pipeline(state.y_c, y_r, z, *state.s, *state.t_op, k);
    report.factorization = lrf::priv1_finish(state, wide);
    lrf::attach_residuals(report, options, k);
    report.wall_time_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
    return report;
}

AuditReport sensitivity_audit(const stream::SketchState& state, std::size_t trials,
                              std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("sensitivity_audit: trials must be >= 1");
    if (state.mode == stream::Mode::NonPrivate)
        throw std::invalid_argument("sensitivity_audit: state must be private");

    AuditReport report;
    report.level = state.mode == stream::Mode::Priv1 ? PrivacyLevel::Priv1 : PrivacyLevel::Priv2;
    report.trials = trials;
    report.alpha = state.alpha;
    report.bound = 1.0 + state.alpha;
    const double hard_cap = 1.2 * report.bound;

    if (report.level == PrivacyLevel::Priv2) {
        // neighboring difference: arbitrary unit-Frobenius matrix
        ChannelAccumulator phi_ch{"E_phi", {}};
        ChannelAccumulator s_ch{"S_E", {}};
        for (std::size_t trial = 0; trial < trials; ++trial) {
            DenseMatrix e(state.m, state.n);
            const std::uint64_t es = rng::derive(seed + trial, kTagAuditE);
            for (std::size_t i = 0; i < e.size(); ++i)
                e.data()[i] = rng::gaussian(es, i);
            const double inv = 1.0 / linalg::frobenius_norm(e);
            for (double& x : e.data()) x *= inv;
            const double phi_sq = std::pow(linalg::frobenius_norm(state.phi->apply_right(e)), 2);
            const double s_sq = std::pow(linalg::frobenius_norm(state.s->apply_left(e)), 2);
            phi_ch.add(phi_sq);
            s_ch.add(s_sq);
        }
        report.channels.push_back(phi_ch.finalize(hard_cap));
        report.channels.push_back(s_ch.finalize(hard_cap));
    } else {
        // neighboring difference: unit rank-one u v^T, augmented with zeros
        const std::size_t mi = state.transposed ? state.n : state.m;
        const std::size_t ni = state.transposed ? state.m : state.n;
        ChannelAccumulator psi_ch{"Psi_E", {}};
        ChannelAccumulator st_ch{"S_E_Tt", {}};
        ChannelAccumulator phi_ch{"E_phi", {}};
        for (std::size_t trial = 0; trial < trials; ++trial) {
            std::vector<double> u(mi, 0.0), v_hat(mi + ni, 0.0);
            const std::uint64_t us = rng::derive(seed + trial, kTagAuditU);
            const std::uint64_t vs = rng::derive(seed + trial, kTagAuditV);
            double un = 0.0, vn = 0.0;
            for (std::size_t i = 0; i < mi; ++i) {
                u[i] = rng::gaussian(us, i);
                un += u[i] * u[i];
            }
            for (std::size_t j = 0; j < ni; ++j) {
                v_hat[j] = rng::gaussian(vs, j);
                vn += v_hat[j] * v_hat[j];
            }
            for (double& x : u) x /= std::sqrt(un);
            for (double& x : v_hat) x /= std::sqrt(vn);

            // E = u v_hat^T, so sketched norms factor into vector norms
            const double psi_u = fro2_of_vector(apply_to_vector(*state.psi, u));
            const double s_u = fro2_of_vector(apply_to_vector(*state.s, u));
            const double t_v = fro2_of_vector(apply_to_vector(*state.t_op, v_hat));
            const double phi_v = fro2_of_vector(apply_to_vector(*state.phi, v_hat));
            psi_ch.add(psi_u);   // ||Psi E||_F^2 = ||Psi u||^2 ||v_hat||^2
            st_ch.add(s_u * t_v);
            phi_ch.add(phi_v);   // ||E Phi||_F^2 = ||u||^2 ||Phi^T v_hat||^2
        }
        report.channels.push_back(psi_ch.finalize(hard_cap));
        report.channels.push_back(st_ch.finalize(hard_cap));
        report.channels.push_back(phi_ch.finalize(hard_cap));
    }

    for (const auto& ch : report.channels)
        if (ch.max_sq > hard_cap) report.flagged = true;
    return report;
}

std::string AuditReport::to_json_string() const {
    nlohmann::json j;
    j["schema"] = 1;
    j["level"] = level == PrivacyLevel::Priv1 ? "priv1" : "priv2";
    j["trials"] = trials;
    j["alpha"] = alpha;
    j["bound"] = bound;
    j["flagged"] = flagged;
    j["channels"] = nlohmann::json::array();
    for (const auto& ch : channels) {
        j["channels"].push_back({{"name", ch.name},
                                 {"max_sq", ch.max_sq},
                                 {"p95_sq", ch.p95_sq},
                                 {"hard_failures", ch.hard_failures}});
    }
    return j.dump(2);
}

double additive_envelope(const PrivacyParams& params, const NoiseScales& scales,
                         std::size_t m, std::size_t n, std::size_t k, std::size_t v) {
    const double md = static_cast<double>(m);
    const double nd = static_cast<double>(n);
    const double kd = static_cast<double>(k);
    const double alpha = params.alpha;
    if (params.level == PrivacyLevel::Priv2) {
        const double budget = std::sqrt(std::log(1.0 / params.delta)) / params.epsilon;
        return ((1.0 + alpha) * std::sqrt(kd * md) +
                std::sqrt(nd * (1.0 + alpha) / (alpha * alpha * alpha) * (kd + 1.0 / alpha))) *
               budget;
    }
    constexpr double l = 2.0;
    return scales.sigma_min * std::sqrt(md + nd) + scales.rho2 * static_cast<double>(v) * l +
           scales.rho1 * std::sqrt(kd * (md + nd));
}

std::pair<double, double> compose(const std::vector<std::pair<double, double>>& budgets,
                                  double delta_prime) {
    if (budgets.empty()) throw std::invalid_argument("compose: needs at least one budget");
    if (!(delta_prime > 0.0)) throw std::invalid_argument("compose: delta' must be > 0");
    const auto [eps0, delta0] = budgets.front();
    for (const auto& [e, d] : budgets) {
        if (e != eps0 || d != delta0)
            throw std::invalid_argument("compose: heterogeneous budgets unsupported");
    }
    if (!(eps0 >= 0.0) || !(delta0 >= 0.0))
        throw std::invalid_argument("compose: budgets must be nonnegative");
    const double l = static_cast<double>(budgets.size());
    const double eps_total =
        std::sqrt(2.0 * l * std::log(1.0 / delta_prime)) * eps0 + 2.0 * l * eps0 * eps0;
    const double delta_total = l * delta0 + delta_prime;
    return {eps_total, delta_total};
}

}  // namespace sketchlrf::dp
