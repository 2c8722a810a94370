#include "sketchlrf/stream.hpp"

#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "sketchlrf/rng.hpp"

namespace sketchlrf::stream {

namespace {

constexpr std::uint64_t kTagPhi = 0x706869ULL;
constexpr std::uint64_t kTagPsi = 0x707369ULL;
constexpr std::uint64_t kTagS = 0x735f6fULL;
constexpr std::uint64_t kTagT = 0x745f6fULL;
constexpr std::uint64_t kTagOmega = 0x6f6d67ULL;

sketch::SketchOperator make_op(sketch::Kind kind, std::size_t out, std::size_t in,
                               std::uint64_t seed) {
    return sketch::SketchOperator::sample(kind, out, in, seed,
                                          sketch::embedding_scale(kind, out, in));
}

// Widest output dimension an operator of this kind supports on `in` inputs.
// SRHT subsamples the padded Hadamard, so it extends to the padded size and
// stays a scaled isometry at full width; the other kinds stop at `in`.
std::size_t max_out_dim(sketch::Kind kind, std::size_t in) {
    return kind == sketch::Kind::Srht ? sketch::next_pow2(in) : in;
}

std::size_t clamp_dim(std::size_t value, std::size_t limit, const char* name) {
    if (value <= limit) return value;
    std::cerr << "sketchlrf: warning: " << name << " = " << value
              << " exceeds the ambient dimension, clamping to " << limit << '\n';
    return limit;
}

// rank-one fold into z: z += delta * left_col(i) (x) right_col(j)
void fold_outer(const sketch::SketchOperator& left, const sketch::SketchOperator& right,
                std::size_t i, std::size_t j, double delta, DenseMatrix& z) {
    const auto le = left.single_entry(i);
    const auto re = right.single_entry(j);
    if (le && re) {
        z(le->first, re->first) += delta * le->second * re->second;
        return;
    }
    std::vector<double> lc(left.out_dim(), 0.0);
    left.add_column(i, 1.0, lc.data());
    std::vector<double> rc(right.out_dim(), 0.0);
    right.add_column(j, 1.0, rc.data());
    for (std::size_t r = 0; r < z.rows(); ++r) {
        if (lc[r] == 0.0) continue;
        const double w = delta * lc[r];
        auto dst = z.row(r);
        for (std::size_t c = 0; c < z.cols(); ++c) dst[c] += w * rc[c];
    }
}

// internal Priv1 update on the augmented matrix: hat_a(i, j) += delta
void priv1_fold(SketchState& st, std::size_t i, std::size_t j, double delta) {
    const auto row = st.phi_hat_row(j);
    for (std::size_t c = 0; c < st.dims.t; ++c) st.y_c(i, c) += delta * row[c];
    sketch::apply_update(*st.psi, sketch::Side::Left, i, j, delta, st.y_r);
    fold_outer(*st.s, *st.t_op, i, j, delta, st.z);
}

}  // namespace

std::string mode_name(Mode mode) {
    switch (mode) {
        case Mode::NonPrivate: return "nonprivate";
        case Mode::Priv1: return "priv1";
        case Mode::Priv2: return "priv2";
    }
    return "unknown";
}

Mode mode_from_name(const std::string& name) {
    if (name == "nonprivate") return Mode::NonPrivate;
    if (name == "priv1") return Mode::Priv1;
    if (name == "priv2") return Mode::Priv2;
    throw std::invalid_argument("unknown mode: " + name);
}

std::vector<double> SketchState::phi_hat_row(std::size_t j) const {
    const std::size_t t = dims.t;
    std::vector<double> row(t, 0.0);
    const double inv_t = 1.0 / static_cast<double>(t);
    if (const auto e = phi->single_entry(j)) {
        const double w = inv_t * e->second;
        for (std::size_t c = 0; c < t; ++c) row[c] = w * omega(e->first, c);
        return row;
    }
    std::vector<double> col(phi->out_dim(), 0.0);
    phi->add_column(j, inv_t, col.data());
    for (std::size_t u = 0; u < phi->out_dim(); ++u) {
        if (col[u] == 0.0) continue;
        for (std::size_t c = 0; c < t; ++c) row[c] += col[u] * omega(u, c);
    }
    return row;
}

SketchState init_state(std::size_t m, std::size_t n, std::size_t k, double alpha,
                       std::uint64_t seed, Mode mode,
                       const std::optional<dp::PrivacyParams>& privacy,
                       const InitOptions& options) {
    if (m < 1 || n < 1 || k < 1) throw std::invalid_argument("init_state: m, n, k must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("init_state: alpha must be in (0, 1]");
    if (mode == Mode::NonPrivate && privacy.has_value())
        throw std::invalid_argument("init_state: privacy params given for NonPrivate mode");
    if (mode != Mode::NonPrivate) {
        if (!privacy.has_value())
            throw std::invalid_argument("init_state: private mode needs privacy params");
        dp::validate(*privacy);
        const auto want = mode == Mode::Priv1 ? sketch::PrivacyLevel::Priv1 : sketch::PrivacyLevel::Priv2;
        if (privacy->level != want)
            throw std::invalid_argument("init_state: privacy level does not match mode");
        if (privacy->alpha != alpha)
            throw std::invalid_argument("init_state: privacy alpha differs from state alpha");
        if (mode == Mode::Priv1 && alpha >= 1.0)
            throw std::invalid_argument("init_state: Priv1 requires alpha < 1");
    }

    SketchState st;
    st.mode = mode;
    st.m = m;
    st.n = n;
    st.k = k;
    st.alpha = alpha;
    st.seed = seed;
    st.privacy = privacy;

    const auto dr = options.regression_kind;
    const auto da = options.affine_kind;

    switch (mode) {
        case Mode::NonPrivate: {
            auto dims = sketch::dims_nonprivate(k, alpha, options.constant_c);
            dims.t = clamp_dim(dims.t, std::min(max_out_dim(dr, n), max_out_dim(dr, m)), "t");
            dims.v = clamp_dim(dims.v, std::min(max_out_dim(da, m), max_out_dim(da, n)), "v");
            st.dims = dims;
            st.phi = make_op(dr, dims.t, n, rng::derive(seed, kTagPhi));
            st.psi = make_op(dr, dims.t, m, rng::derive(seed, kTagPsi));
            st.s = make_op(da, dims.v, m, rng::derive(seed, kTagS));
            st.t_op = make_op(da, dims.v, n, rng::derive(seed, kTagT));
            st.y_c = DenseMatrix(m, dims.t);
            st.y_r = DenseMatrix(dims.t, n);
            st.z = DenseMatrix(dims.v, dims.v);
            break;
        }
        case Mode::Priv2: {
            auto dims =
                sketch::dims_private(k, alpha, privacy->delta, sketch::PrivacyLevel::Priv2,
                                     options.constant_c);
            dims.t = clamp_dim(dims.t, max_out_dim(dr, n), "t");
            dims.v = clamp_dim(dims.v, max_out_dim(da, m), "v");
            st.dims = dims;
            st.scales = options.scales_override
                            ? *options.scales_override
                            : dp::calibrate(*privacy, dims.t);
            st.phi = make_op(dr, dims.t, n, rng::derive(seed, kTagPhi));
            st.s = make_op(da, dims.v, m, rng::derive(seed, kTagS));
            st.y_c = DenseMatrix(m, dims.t);  // Y' = A Phi
            st.z = DenseMatrix(dims.v, n);    // Z' = S A
            break;
        }
        case Mode::Priv1: {
            st.transposed = m > n;
            const std::size_t mi = st.transposed ? n : m;  // u = min(m, n)
            const std::size_t ni = st.transposed ? m : n;
            const std::size_t wide = mi + ni;
            auto dims = sketch::dims_private(k, alpha, privacy->delta, sketch::PrivacyLevel::Priv1,
                                             options.constant_c);
            dims.t = clamp_dim(dims.t, max_out_dim(dr, mi), "t");
            dims.v = clamp_dim(dims.v, std::min(max_out_dim(da, mi), max_out_dim(da, wide)),
                               "v");
            st.dims = dims;
            st.scales = options.scales_override
                            ? *options.scales_override
                            : dp::calibrate(*privacy, dims.t);
            // Phi^T ~ D_R over R^{u x (m+n)}; Omega ~ N(0,1)^{u x t}
            st.phi = make_op(dr, mi, wide, rng::derive(seed, kTagPhi));
            st.psi = make_op(dr, dims.t, mi, rng::derive(seed, kTagPsi));
            st.s = make_op(da, dims.v, mi, rng::derive(seed, kTagS));
            st.t_op = make_op(da, dims.v, wide, rng::derive(seed, kTagT));
            st.omega = DenseMatrix(mi, dims.t);
            const std::uint64_t os = rng::derive(seed, kTagOmega);
            for (std::size_t i = 0; i < mi; ++i)
                for (std::size_t c = 0; c < dims.t; ++c)
                    st.omega(i, c) = rng::gaussian(os, i * dims.t + c);
            st.y_c = DenseMatrix(mi, dims.t);
            st.y_r = DenseMatrix(dims.t, wide);
            st.z = DenseMatrix(dims.v, dims.v);
            // pre-seed the data-independent sigma_min I block of (A | sigma_min I)
            if (st.scales.sigma_min != 0.0) {
                for (std::size_t i = 0; i < mi; ++i)
                    priv1_fold(st, i, ni + i, st.scales.sigma_min);
            }
            break;
        }
    }
    return st;
}

void ingest(SketchState& state, const TurnstileUpdate& update) {
    if (update.row >= state.m)
        throw std::out_of_range("ingest: row index " + std::to_string(update.row) +
                                " out of range");
    if (update.col >= state.n)
        throw std::out_of_range("ingest: col index " + std::to_string(update.col) +
                                " out of range");
    if (!std::isfinite(update.delta))
        throw std::invalid_argument("ingest: delta must be finite");

    switch (state.mode) {
        case Mode::NonPrivate:
            sketch::apply_update(*state.phi, sketch::Side::Right, update.row, update.col,
                                 update.delta, state.y_c);
            sketch::apply_update(*state.psi, sketch::Side::Left, update.row, update.col,
                                 update.delta, state.y_r);
            fold_outer(*state.s, *state.t_op, update.row, update.col, update.delta, state.z);
            break;
        case Mode::Priv2:
            sketch::apply_update(*state.phi, sketch::Side::Right, update.row, update.col,
                                 update.delta, state.y_c);
            sketch::apply_update(*state.s, sketch::Side::Left, update.row, update.col,
                                 update.delta, state.z);
            break;
        case Mode::Priv1: {
            const std::size_t i = state.transposed ? update.col : update.row;
            const std::size_t j = state.transposed ? update.row : update.col;
            priv1_fold(state, i, j, update.delta);
            break;
        }
    }
    ++state.updates_seen;
}

void ingest_matrix(SketchState& state, const DenseMatrix& a) {
    if (a.rows() != state.m || a.cols() != state.n)
        throw std::invalid_argument("ingest_matrix: shape mismatch");
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (a(i, j) != 0.0) ingest(state, {i, j, a(i, j)});
}

StreamReader::StreamReader(const std::string& path) : in_(path), path_(path) {
    if (!in_) throw std::runtime_error("cannot open stream file: " + path);
    std::string line;
    while (std::getline(in_, line)) {
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t pos = line.find_first_not_of(" \t");
        if (pos == std::string::npos || line[pos] == '#') continue;
        if (line[pos] != '%')
            throw std::runtime_error(path_ + ":" + std::to_string(line_no_) +
                                     ": expected header line \"% m n\"");
        std::istringstream iss(line.substr(pos + 1));
        if (!(iss >> m_ >> n_) || m_ < 1 || n_ < 1)
            throw std::runtime_error(path_ + ":" + std::to_string(line_no_) +
                                     ": malformed header line");
        return;
    }
    throw std::runtime_error(path_ + ": missing header line \"% m n\"");
}

std::optional<TurnstileUpdate> StreamReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t pos = line.find_first_not_of(" \t");
        if (pos == std::string::npos || line[pos] == '#') continue;
        std::istringstream iss(line);
        long long i = 0, j = 0;
        double delta = 0.0;
        std::string extra;
        if (!(iss >> i >> j >> delta) || (iss >> extra))
            throw std::runtime_error(path_ + ":" + std::to_string(line_no_) +
                                     ": malformed update line: " + line);
        if (i < 0 || static_cast<std::size_t>(i) >= m_)
            throw std::runtime_error(path_ + ":" + std::to_string(line_no_) +
                                     ": row index " + std::to_string(i) + " out of range");
        if (j < 0 || static_cast<std::size_t>(j) >= n_)
            throw std::runtime_error(path_ + ":" + std::to_string(line_no_) +
                                     ": col index " + std::to_string(j) + " out of range");
        if (!std::isfinite(delta))
            throw std::runtime_error(path_ + ":" + std::to_string(line_no_) +
                                     ": non-finite delta");
        ++count_;
        return TurnstileUpdate{static_cast<std::size_t>(i), static_cast<std::size_t>(j), delta};
    }
    return std::nullopt;
}

std::vector<TurnstileUpdate> read_stream(const std::string& path, std::size_t& m,
                                         std::size_t& n) {
    StreamReader reader(path);
    m = reader.m();
    n = reader.n();
    std::vector<TurnstileUpdate> updates;
    while (auto u = reader.next()) updates.push_back(*u);
    return updates;
}

}  // namespace sketchlrf::stream
