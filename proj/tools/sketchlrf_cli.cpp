// Command-line front end: synthetic data generation, stream sketching,
// factorization (plain and private), sensitivity audits, and benchmark runs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sketchlrf/bench.hpp"
#include "sketchlrf/dp.hpp"
#include "sketchlrf/lrf.hpp"
#include "sketchlrf/matrix.hpp"
#include "sketchlrf/stream.hpp"

namespace {

using namespace sketchlrf;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("SKETCHLRF_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    return 0;
}

sketch::Kind parse_kind(const std::string& name) { return sketch::kind_from_name(name); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text << '\n';
}

nlohmann::json factorization_report(const lrf::LrfReport& report,
                                    const stream::SketchState& state, std::size_t k) {
    nlohmann::json j;
    j["schema"] = 1;
    j["k"] = k;
    j["mode"] = stream::mode_name(state.mode);
    j["dims"] = {{"t", state.dims.t}, {"v", state.dims.v}};
    j["seed"] = state.seed;
    j["updates_seen"] = state.updates_seen;
    j["effective_rank"] = report.factorization.effective_rank;
    j["degenerate"] = report.factorization.degenerate;
    j["wall_time_ms"] = report.wall_time_ms;
    if (report.residual_fro) j["residual_fro"] = *report.residual_fro;
    if (report.oracle_residual_fro) j["oracle_residual_fro"] = *report.oracle_residual_fro;
    if (report.ratio) j["ratio"] = *report.ratio;
    j["noise_scales"] = {{"rho", state.scales.rho},
                         {"rho1", state.scales.rho1},
                         {"rho2", state.scales.rho2},
                         {"sigma_min", state.scales.sigma_min}};
    if (state.privacy) {
        j["additive_envelope"] = dp::additive_envelope(*state.privacy, state.scales, state.m,
                                                       state.n, k, state.dims.v);
    }
    return j;
}

void write_factorization(const std::string& dir, const lrf::Factorization& f) {
    std::filesystem::create_directories(dir);
    write_matrix(dir + "/u.mat", f.u);
    DenseMatrix sigma(f.sigma.size(), 1);
    for (std::size_t i = 0; i < f.sigma.size(); ++i) sigma(i, 0) = f.sigma[i];
    write_matrix(dir + "/sigma.vec", sigma);
    write_matrix(dir + "/v.mat", f.v);
}

struct CommonSketchFlags {
    std::size_t k = 5;
    double alpha = 0.5;
    double c = 4.0;
    std::string regression_kind = "countsketch";
    std::string affine_kind = "countsketch";
    std::optional<std::uint64_t> seed;
};

void add_sketch_flags(CLI::App* cmd, CommonSketchFlags& f) {
    cmd->add_option("--k", f.k, "target rank");
    cmd->add_option("--alpha", f.alpha, "relative error parameter in (0, 1]");
    cmd->add_option("--c", f.c, "calibration constant");
    cmd->add_option("--sketch", f.regression_kind,
                    "regression sketch kind (countsketch|srht|gaussian)");
    cmd->add_option("--affine-sketch", f.affine_kind,
                    "affine sketch kind (countsketch|srht|gaussian)");
    cmd->add_option("--seed", f.seed, "seed (falls back to SKETCHLRF_SEED, then 0)");
}

stream::SketchState build_state_from_stream(const std::string& stream_path,
                                            const CommonSketchFlags& flags, stream::Mode mode,
                                            const std::optional<dp::PrivacyParams>& privacy) {
    stream::StreamReader reader(stream_path);
    stream::InitOptions options;
    options.regression_kind = parse_kind(flags.regression_kind);
    options.affine_kind = parse_kind(flags.affine_kind);
    options.constant_c = flags.c;
    auto state = stream::init_state(reader.m(), reader.n(), flags.k, flags.alpha,
                                    resolve_seed(flags.seed), mode, privacy, options);
    while (auto update = reader.next()) stream::ingest(state, *update);
    return state;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming low-rank factorization with sketches"};
    app.require_subcommand(1);

    // ---- gen ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a synthetic low-rank-plus-noise matrix");
    std::size_t gen_m = 64, gen_n = 48, gen_r = 5;
    double gen_noise = 0.05;
    std::optional<std::uint64_t> gen_seed;
    std::string gen_out = "a.mat", gen_stream, gen_order = "row-major";
    gen->add_option("--m", gen_m, "rows");
    gen->add_option("--n", gen_n, "cols");
    gen->add_option("--r", gen_r, "planted rank");
    gen->add_option("--noise", gen_noise, "noise level");
    gen->add_option("--seed", gen_seed, "seed");
    gen->add_option("--out", gen_out, "matrix file path");
    gen->add_option("--stream", gen_stream, "also emit a turnstile stream file");
    gen->add_option("--order", gen_order, "stream order (row-major|random)");

    // ---- sketch -------------------------------------------------------
    auto* sk = app.add_subcommand("sketch", "ingest a stream and dump the sketch state");
    std::string sk_stream, sk_out = "sketches";
    CommonSketchFlags sk_flags;
    sk->add_option("--stream", sk_stream, "input stream file")->required();
    sk->add_option("--out", sk_out, "output directory");
    add_sketch_flags(sk, sk_flags);

    // ---- factorize ----------------------------------------------------
    auto* fac = app.add_subcommand("factorize", "non-private factorization from a stream");
    std::string fac_stream, fac_out = "factorization", fac_reference;
    CommonSketchFlags fac_flags;
    fac->add_option("--stream", fac_stream, "input stream file")->required();
    fac->add_option("--out", fac_out, "output directory");
    fac->add_option("--reference", fac_reference,
                    "matrix file for residual reporting (enables the exact oracle)");
    add_sketch_flags(fac, fac_flags);

    // ---- dp-factorize --------------------------------------------------
    auto* dpf = app.add_subcommand("dp-factorize", "differentially private factorization");
    std::string dpf_stream, dpf_out = "factorization", dpf_reference, dpf_level = "priv2";
    double dpf_eps = 1.0, dpf_delta = 1e-6;
    std::optional<std::uint64_t> dpf_noise_seed;
    CommonSketchFlags dpf_flags;
    dpf->add_option("--stream", dpf_stream, "input stream file")->required();
    dpf->add_option("--out", dpf_out, "output directory");
    dpf->add_option("--reference", dpf_reference, "matrix file for residual reporting");
    dpf->add_option("--level", dpf_level, "privacy granularity (priv1|priv2)");
    dpf->add_option("--epsilon", dpf_eps, "privacy budget epsilon");
    dpf->add_option("--delta", dpf_delta, "privacy budget delta");
    dpf->add_option("--noise-seed", dpf_noise_seed, "seed for the Gaussian noise draws");
    add_sketch_flags(dpf, dpf_flags);

    // ---- audit ---------------------------------------------------------
    auto* audit = app.add_subcommand("audit", "empirical l2-sensitivity audit");
    std::size_t audit_m = 256, audit_n = 256, audit_trials = 500;
    std::string audit_level = "priv2", audit_out;
    double audit_eps = 1.0, audit_delta = 0.01;
    CommonSketchFlags audit_flags;
    audit->add_option("--m", audit_m, "rows");
    audit->add_option("--n", audit_n, "cols");
    audit->add_option("--level", audit_level, "privacy granularity (priv1|priv2)");
    audit->add_option("--epsilon", audit_eps, "epsilon (echoed into calibration)");
    audit->add_option("--delta", audit_delta, "delta");
    audit->add_option("--trials", audit_trials, "number of neighboring differences");
    audit->add_option("--out", audit_out, "write the JSON report here instead of stdout");
    add_sketch_flags(audit, audit_flags);

    // ---- bench ----------------------------------------------------------
    auto* bench_cmd = app.add_subcommand("bench", "multi-trial experiment harness");
    bench::ExperimentConfig cfg;
    std::string bench_mode = "nonprivate", bench_rk = "countsketch", bench_ak = "countsketch";
    std::string bench_out;
    std::optional<std::uint64_t> bench_seed;
    std::optional<double> bench_eps, bench_delta;
    bool bench_no_oracle = false, bench_no_timings = false;
    bench_cmd->add_option("--m", cfg.m, "rows");
    bench_cmd->add_option("--n", cfg.n, "cols");
    bench_cmd->add_option("--k", cfg.k, "target rank");
    bench_cmd->add_option("--alpha", cfg.alpha, "relative error parameter");
    bench_cmd->add_option("--mode", bench_mode, "nonprivate|priv1|priv2");
    bench_cmd->add_option("--epsilon", bench_eps, "privacy epsilon");
    bench_cmd->add_option("--delta", bench_delta, "privacy delta");
    bench_cmd->add_option("--trials", cfg.trials, "number of trials");
    bench_cmd->add_option("--seed", bench_seed, "base seed");
    bench_cmd->add_option("--c", cfg.constant_c, "calibration constant");
    bench_cmd->add_option("--sketch", bench_rk, "regression sketch kind");
    bench_cmd->add_option("--affine-sketch", bench_ak, "affine sketch kind");
    bench_cmd->add_option("--gen-rank", cfg.gen_rank, "planted rank of the inputs");
    bench_cmd->add_option("--gen-noise", cfg.gen_noise_level, "planted noise level");
    bench_cmd->add_option("--min-success-rate", cfg.min_success_rate,
                          "exit nonzero when the success rate falls below this");
    bench_cmd->add_flag("--no-oracle", bench_no_oracle, "skip the exact rank-k oracle");
    bench_cmd->add_flag("--no-timings", bench_no_timings,
                        "omit timing fields (byte-stable output)");
    bench_cmd->add_option("--out", bench_out, "write the JSON summary here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const DenseMatrix a = bench::gen_lowrank_plus_noise(gen_m, gen_n, gen_r, gen_noise,
                                                                resolve_seed(gen_seed));
            write_matrix(gen_out, a);
            std::cout << "wrote " << gen_out << " (" << gen_m << "x" << gen_n << ")\n";
            if (!gen_stream.empty()) {
                const auto order = gen_order == "random" ? bench::StreamOrder::Random
                                                         : bench::StreamOrder::RowMajor;
                bench::emit_stream(a, order, gen_stream, resolve_seed(gen_seed));
                std::cout << "wrote " << gen_stream << '\n';
            }
        } else if (*sk) {
            const auto state =
                build_state_from_stream(sk_stream, sk_flags, stream::Mode::NonPrivate, {});
            std::filesystem::create_directories(sk_out);
            write_matrix(sk_out + "/y_c.mat", state.y_c);
            write_matrix(sk_out + "/y_r.mat", state.y_r);
            write_matrix(sk_out + "/z.mat", state.z);
            nlohmann::json ops;
            ops["phi"] = nlohmann::json::parse(state.phi->to_json_string());
            ops["psi"] = nlohmann::json::parse(state.psi->to_json_string());
            ops["s"] = nlohmann::json::parse(state.s->to_json_string());
            ops["t"] = nlohmann::json::parse(state.t_op->to_json_string());
            ops["updates_seen"] = state.updates_seen;
            write_text(sk_out + "/operators.json", ops.dump(2));
            std::cout << "wrote sketches to " << sk_out << " after " << state.updates_seen
                      << " updates\n";
        } else if (*fac) {
            const auto state =
                build_state_from_stream(fac_stream, fac_flags, stream::Mode::NonPrivate, {});
            DenseMatrix reference;
            lrf::FactorizeOptions options;
            if (!fac_reference.empty()) {
                reference = read_matrix(fac_reference);
                options.reference = &reference;
                options.with_oracle = true;
            }
            const auto report = lrf::factorize(state, fac_flags.k, options);
            write_factorization(fac_out, report.factorization);
            write_text(fac_out + "/report.json",
                       factorization_report(report, state, fac_flags.k).dump(2));
            std::cout << "wrote factorization to " << fac_out << '\n';
        } else if (*dpf) {
            dp::PrivacyParams params;
            params.epsilon = dpf_eps;
            params.delta = dpf_delta;
            params.alpha = dpf_flags.alpha;
            params.level = dpf_level == "priv1" ? dp::PrivacyLevel::Priv1
                                                : dp::PrivacyLevel::Priv2;
            const auto mode =
                dpf_level == "priv1" ? stream::Mode::Priv1 : stream::Mode::Priv2;
            const auto state = build_state_from_stream(dpf_stream, dpf_flags, mode, params);
            DenseMatrix reference;
            lrf::FactorizeOptions options;
            if (!dpf_reference.empty()) {
                reference = read_matrix(dpf_reference);
                options.reference = &reference;
                options.with_oracle = true;
            }
            const std::uint64_t noise_seed =
                dpf_noise_seed ? *dpf_noise_seed : resolve_seed(dpf_flags.seed) + 1;
            const auto report =
                mode == stream::Mode::Priv1
                    ? dp::private_space_optimal_lrf(state, dpf_flags.k, params, noise_seed,
                                                    options)
                    : dp::private_frobenius_lrf(state, dpf_flags.k, params, noise_seed,
                                                options);
            write_factorization(dpf_out, report.factorization);
            write_text(dpf_out + "/report.json",
                       factorization_report(report, state, dpf_flags.k).dump(2));
            std::cout << "wrote private factorization to " << dpf_out << '\n';
        } else if (*audit) {
            dp::PrivacyParams params;
            params.epsilon = audit_eps;
            params.delta = audit_delta;
            params.alpha = audit_flags.alpha;
            params.level = audit_level == "priv1" ? dp::PrivacyLevel::Priv1
                                                  : dp::PrivacyLevel::Priv2;
            const auto mode =
                audit_level == "priv1" ? stream::Mode::Priv1 : stream::Mode::Priv2;
            stream::InitOptions options;
            options.regression_kind = parse_kind(audit_flags.regression_kind);
            options.affine_kind = parse_kind(audit_flags.affine_kind);
            options.constant_c = audit_flags.c;
            const auto state =
                stream::init_state(audit_m, audit_n, audit_flags.k, audit_flags.alpha,
                                   resolve_seed(audit_flags.seed), mode, params, options);
            const auto report = dp::sensitivity_audit(state, audit_trials,
                                                      resolve_seed(audit_flags.seed) + 17);
            if (audit_out.empty()) {
                std::cout << report.to_json_string() << '\n';
            } else {
                write_text(audit_out, report.to_json_string());
                std::cout << "wrote audit report to " << audit_out << '\n';
            }
            if (report.flagged) return 2;
        } else if (*bench_cmd) {
            cfg.mode = stream::mode_from_name(bench_mode);
            cfg.regression_kind = parse_kind(bench_rk);
            cfg.affine_kind = parse_kind(bench_ak);
            cfg.seed = resolve_seed(bench_seed);
            cfg.epsilon = bench_eps;
            cfg.delta = bench_delta;
            cfg.oracle = !bench_no_oracle;
            const auto result = bench::run_experiment(cfg);
            const std::string json = result.to_json_string(cfg, !bench_no_timings);
            if (bench_out.empty()) {
                std::cout << json << '\n';
            } else {
                write_text(bench_out, json);
                std::cout << "wrote summary to " << bench_out << '\n';
            }
            if (!result.passes(cfg)) return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
