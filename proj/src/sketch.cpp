#include "sketchlrf/sketch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sketchlrf/linalg.hpp"
#include "sketchlrf/rng.hpp"

namespace sketchlrf::sketch {

namespace {

// role tags for deriving independent sub-streams from an operator seed
constexpr std::uint64_t kTagHash = 0x68617368ULL;
constexpr std::uint64_t kTagSign = 0x7369676eULL;
constexpr std::uint64_t kTagDiag = 0x64696167ULL;
constexpr std::uint64_t kTagRows = 0x726f7773ULL;
constexpr std::uint64_t kTagInner = 0x696e6e72ULL;
constexpr std::uint64_t kTagOuter = 0x6f757472ULL;

std::size_t ceil_to_count(double x) {
    const double c = std::ceil(x);
    if (c < 1.0) return 1;
    return static_cast<std::size_t>(c);
}

// Widest power-of-two middle stage <= in_dim, aiming for 8x the output dim.
std::size_t default_mid_dim(std::size_t out_dim, std::size_t in_dim) {
    std::size_t mid = next_pow2(8 * out_dim);
    while (mid > in_dim) mid >>= 1;
    return mid;
}

}  // namespace

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::CountSketch: return "countsketch";
        case Kind::Srht: return "srht";
        case Kind::Gaussian: return "gaussian";
        case Kind::SrhtCountSketch: return "srht-countsketch";
    }
    return "unknown";
}

Kind kind_from_name(const std::string& name) {
    if (name == "countsketch") return Kind::CountSketch;
    if (name == "srht") return Kind::Srht;
    if (name == "gaussian") return Kind::Gaussian;
    if (name == "srht-countsketch") return Kind::SrhtCountSketch;
    throw std::invalid_argument("unknown sketch kind: " + name);
}

EmbeddingDims dims_nonprivate(std::size_t k, double alpha, double c) {
    if (k < 1) throw std::invalid_argument("dims_nonprivate: k must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("dims_nonprivate: alpha must be in (0, 1]");
    if (!(c > 0.0)) throw std::invalid_argument("dims_nonprivate: c must be > 0");
    const double lg = std::log2(static_cast<double>(k) + 2.0);
    EmbeddingDims d;
    d.t = ceil_to_count(c * (static_cast<double>(k) / alpha) * lg);
    d.v = ceil_to_count(c * (static_cast<double>(k) / (alpha * alpha)) * lg);
    d.constant_c = c;
    return d;
}

EmbeddingDims dims_private(std::size_t k, double alpha, double delta, PrivacyLevel level,
                           double c) {
    if (k < 1) throw std::invalid_argument("dims_private: k must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("dims_private: alpha must be in (0, 1]");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("dims_private: delta must be in (0, 1)");
    if (!(c > 0.0)) throw std::invalid_argument("dims_private: c must be > 0");
    const double kd = static_cast<double>(k);
    const double base_t = std::max(kd / alpha, 1.0 / (alpha * alpha));
    const double base_v = std::max(kd / (alpha * alpha), 1.0 / (alpha * alpha * alpha * alpha));
    const double lg_delta = std::log2(1.0 / delta);
    const double lg_k = level == PrivacyLevel::Priv1 ? std::log2(kd + 2.0) : 1.0;
    EmbeddingDims d;
    d.t = ceil_to_count(c * base_t * lg_k * lg_delta);
    d.v = ceil_to_count(c * base_v * lg_k * lg_delta);
    d.constant_c = c;
    return d;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

double embedding_scale(Kind kind, std::size_t out_dim, std::size_t in_dim) {
    switch (kind) {
        case Kind::CountSketch: return 1.0;
        case Kind::Srht:
            return std::sqrt(static_cast<double>(next_pow2(in_dim)) /
                             static_cast<double>(out_dim));
        case Kind::Gaussian: return 1.0 / std::sqrt(static_cast<double>(out_dim));
        case Kind::SrhtCountSketch:
            // inner CountSketch is norm-neutral, outer SRHT selects out of mid rows
            return std::sqrt(static_cast<double>(default_mid_dim(out_dim, in_dim)) /
                             static_cast<double>(out_dim));
    }
    return 1.0;
}

void fwht(double* data, std::size_t n) {
    for (std::size_t h = 1; h < n; h <<= 1) {
        for (std::size_t i = 0; i < n; i += h << 1) {
            for (std::size_t j = i; j < i + h; ++j) {
                const double x = data[j];
                const double y = data[j + h];
                data[j] = x + y;
                data[j + h] = x - y;
            }
        }
    }
}

SketchOperator SketchOperator::sample(Kind kind, std::size_t out_dim, std::size_t in_dim,
                                      std::uint64_t seed, double scale) {
    if (out_dim < 1 || in_dim < 1) throw std::invalid_argument("sample: dims must be >= 1");
    SketchOperator op;
    op.kind_ = kind;
    op.out_dim_ = out_dim;
    op.in_dim_ = in_dim;
    op.seed_ = seed;
    op.scale_ = scale;

    switch (kind) {
        case Kind::CountSketch: {
            if (out_dim > in_dim)
                throw std::invalid_argument("CountSketch: out_dim must be <= in_dim");
            const std::uint64_t hs = rng::derive(seed, kTagHash);
            const std::uint64_t ss = rng::derive(seed, kTagSign);
            op.hash_.resize(in_dim);
            op.sign_.resize(in_dim);
            for (std::size_t j = 0; j < in_dim; ++j) {
                op.hash_[j] = rng::below(hs, j, out_dim);
                op.sign_[j] = static_cast<std::int8_t>(rng::sign(ss, j));
            }
            break;
        }
        case Kind::Srht: {
            const std::size_t pad = next_pow2(in_dim);
            if (out_dim > pad)
                throw std::invalid_argument("Srht: out_dim must be <= padded in_dim");
            op.pad_dim_ = pad;
            const std::uint64_t ds = rng::derive(seed, kTagDiag);
            op.diag_.resize(pad);
            for (std::size_t j = 0; j < pad; ++j)
                op.diag_[j] = static_cast<std::int8_t>(rng::sign(ds, j));
            // rows without replacement: partial Fisher-Yates over [pad)
            const std::uint64_t rs = rng::derive(seed, kTagRows);
            std::vector<std::size_t> perm(pad);
            std::iota(perm.begin(), perm.end(), 0);
            op.rows_.resize(out_dim);
            for (std::size_t i = 0; i < out_dim; ++i) {
                const std::size_t j = i + rng::below(rs, i, pad - i);
                std::swap(perm[i], perm[j]);
                op.rows_[i] = perm[i];
            }
            break;
        }
        case Kind::Gaussian:
            break;  // entries regenerated on the fly
        case Kind::SrhtCountSketch: {
            const std::size_t mid = default_mid_dim(out_dim, in_dim);
            if (mid < out_dim)
                throw std::invalid_argument(
                    "SrhtCountSketch: no power-of-two middle stage fits; use sample_composed");
            return sample_composed(out_dim, mid, in_dim, seed, scale);
        }
    }
    return op;
}

SketchOperator SketchOperator::sample_composed(std::size_t out_dim, std::size_t mid_dim,
                                               std::size_t in_dim, std::uint64_t seed,
                                               double scale) {
    if (out_dim < 1 || mid_dim < 1 || in_dim < 1)
        throw std::invalid_argument("sample_composed: dims must be >= 1");
    if (mid_dim != next_pow2(mid_dim))
        throw std::invalid_argument("sample_composed: mid_dim must be a power of two");
    if (out_dim > mid_dim || mid_dim > in_dim)
        throw std::invalid_argument("sample_composed: need out_dim <= mid_dim <= in_dim");
    SketchOperator op;
    op.kind_ = Kind::SrhtCountSketch;
    op.out_dim_ = out_dim;
    op.in_dim_ = in_dim;
    op.mid_dim_ = mid_dim;
    op.seed_ = seed;
    op.scale_ = scale;
    op.parts_.push_back(
        sample(Kind::CountSketch, mid_dim, in_dim, rng::derive(seed, kTagInner), 1.0));
    op.parts_.push_back(sample(Kind::Srht, out_dim, mid_dim, rng::derive(seed, kTagOuter), 1.0));
    return op;
}

DenseMatrix SketchOperator::apply_left(const DenseMatrix& a) const {
    if (a.rows() != in_dim_) throw std::invalid_argument("apply_left: dim mismatch");
    const std::size_t n = a.cols();
    switch (kind_) {
        case Kind::CountSketch: {
            DenseMatrix out(out_dim_, n);
            for (std::size_t i = 0; i < in_dim_; ++i) {
                const double coeff = scale_ * static_cast<double>(sign_[i]);
                auto dst = out.row(hash_[i]);
                auto src = a.row(i);
                for (std::size_t j = 0; j < n; ++j) dst[j] += coeff * src[j];
            }
            return out;
        }
        case Kind::Srht: {
            DenseMatrix out(out_dim_, n);
            std::vector<double> work(pad_dim_);
            const double norm = scale_ / std::sqrt(static_cast<double>(pad_dim_));
            for (std::size_t c = 0; c < n; ++c) {
                std::fill(work.begin(), work.end(), 0.0);
                for (std::size_t i = 0; i < in_dim_; ++i)
                    work[i] = static_cast<double>(diag_[i]) * a(i, c);
                fwht(work.data(), pad_dim_);
                for (std::size_t r = 0; r < out_dim_; ++r) out(r, c) = norm * work[rows_[r]];
            }
            return out;
        }
        case Kind::Gaussian: {
            DenseMatrix out(out_dim_, n);
            for (std::size_t k = 0; k < in_dim_; ++k) {
                auto src = a.row(k);
                for (std::size_t i = 0; i < out_dim_; ++i) {
                    const double g = scale_ * rng::gaussian(seed_, i * in_dim_ + k);
                    if (g == 0.0) continue;
                    auto dst = out.row(i);
                    for (std::size_t j = 0; j < n; ++j) dst[j] += g * src[j];
                }
            }
            return out;
        }
        case Kind::SrhtCountSketch: {
            const DenseMatrix mid = parts_[0].apply_left(a);
            DenseMatrix out = parts_[1].apply_left(mid);
            if (scale_ != 1.0)
                for (double& x : out.data()) x *= scale_;
            return out;
        }
    }
    throw std::logic_error("apply_left: unreachable");
}

DenseMatrix SketchOperator::apply_right(const DenseMatrix& a) const {
    if (a.cols() != in_dim_) throw std::invalid_argument("apply_right: dim mismatch");
    const std::size_t m = a.rows();
    switch (kind_) {
        case Kind::CountSketch: {
            DenseMatrix out(m, out_dim_);
            for (std::size_t i = 0; i < m; ++i) {
                auto src = a.row(i);
                auto dst = out.row(i);
                for (std::size_t k = 0; k < in_dim_; ++k)
                    dst[hash_[k]] += scale_ * static_cast<double>(sign_[k]) * src[k];
            }
            return out;
        }
        case Kind::Srht: {
            DenseMatrix out(m, out_dim_);
            std::vector<double> work(pad_dim_);
            const double norm = scale_ / std::sqrt(static_cast<double>(pad_dim_));
            for (std::size_t i = 0; i < m; ++i) {
                std::fill(work.begin(), work.end(), 0.0);
                auto src = a.row(i);
                for (std::size_t k = 0; k < in_dim_; ++k)
                    work[k] = static_cast<double>(diag_[k]) * src[k];
                fwht(work.data(), pad_dim_);
                auto dst = out.row(i);
                for (std::size_t r = 0; r < out_dim_; ++r) dst[r] = norm * work[rows_[r]];
            }
            return out;
        }
        case Kind::Gaussian:
        case Kind::SrhtCountSketch:
            return apply_left(a.transposed()).transposed();
    }
    throw std::logic_error("apply_right: unreachable");
}

void SketchOperator::add_column(std::size_t j, double coeff, double* out) const {
    switch (kind_) {
        case Kind::CountSketch:
            out[hash_[j]] += coeff * scale_ * static_cast<double>(sign_[j]);
            return;
        case Kind::Srht: {
            const double norm = coeff * scale_ * static_cast<double>(diag_[j]) /
                                std::sqrt(static_cast<double>(pad_dim_));
            for (std::size_t r = 0; r < out_dim_; ++r) {
                const bool neg = std::popcount(rows_[r] & j) & 1U;
                out[r] += neg ? -norm : norm;
            }
            return;
        }
        case Kind::Gaussian: {
            for (std::size_t r = 0; r < out_dim_; ++r)
                out[r] += coeff * scale_ * rng::gaussian(seed_, r * in_dim_ + j);
            return;
        }
        case Kind::SrhtCountSketch: {
            const auto inner = parts_[0].single_entry(j);
            parts_[1].add_column(inner->first, coeff * scale_ * inner->second, out);
            return;
        }
    }
}

std::optional<std::pair<std::size_t, double>> SketchOperator::single_entry(std::size_t j) const {
    if (kind_ != Kind::CountSketch) return std::nullopt;
    return std::make_pair(hash_[j], scale_ * static_cast<double>(sign_[j]));
}

DenseMatrix SketchOperator::materialize() const {
    DenseMatrix m(out_dim_, in_dim_);
    std::vector<double> col(out_dim_);
    for (std::size_t j = 0; j < in_dim_; ++j) {
        std::fill(col.begin(), col.end(), 0.0);
        add_column(j, 1.0, col.data());
        for (std::size_t i = 0; i < out_dim_; ++i) m(i, j) = col[i];
    }
    return m;
}

double SketchOperator::pinv_isometry_scale() const {
    switch (kind_) {
        case Kind::Srht: return scale_;
        case Kind::SrhtCountSketch:
            // inner CountSketch buckets hold ~in/mid entries, so S ~ scale*sqrt(in/mid)*Q
            return scale_ *
                   std::sqrt(static_cast<double>(in_dim_) / static_cast<double>(mid_dim_));
        default:
            throw std::invalid_argument("pinv_isometry_scale: kind not supported");
    }
}

DenseMatrix SketchOperator::pinv_apply(const DenseMatrix& n) const {
    if (n.rows() != out_dim_) throw std::invalid_argument("pinv_apply: dim mismatch");
    switch (kind_) {
        case Kind::Srht: {
            if (in_dim_ != pad_dim_) {
                // padded case has no closed form; use the dense pseudo-inverse
                return linalg::pinv(materialize()) * n;
            }
            // S = scale * Pi W D has orthonormal rows at scale 1, so S^+ = S^T / scale^2
            const std::size_t cols = n.cols();
            DenseMatrix scattered(pad_dim_, cols);
            for (std::size_t r = 0; r < out_dim_; ++r)
                for (std::size_t c = 0; c < cols; ++c) scattered(rows_[r], c) = n(r, c);
            std::vector<double> work(pad_dim_);
            DenseMatrix out(in_dim_, cols);
            const double norm = 1.0 / (scale_ * std::sqrt(static_cast<double>(pad_dim_)));
            for (std::size_t c = 0; c < cols; ++c) {
                for (std::size_t i = 0; i < pad_dim_; ++i) work[i] = scattered(i, c);
                fwht(work.data(), pad_dim_);
                for (std::size_t i = 0; i < in_dim_; ++i)
                    out(i, c) = norm * static_cast<double>(diag_[i]) * work[i];
            }
            return out;
        }
        case Kind::SrhtCountSketch: {
            // Write S = G V^T with V the orthonormalized CountSketch rows;
            // then S^+ = V G^+ exactly.
            const SketchOperator& cs = parts_[0];
            const SketchOperator& outer = parts_[1];
            std::vector<std::size_t> count(mid_dim_, 0);
            for (std::size_t j = 0; j < in_dim_; ++j) ++count[cs.hash_[j]];
            std::vector<std::size_t> bucket_index(mid_dim_, 0);
            std::vector<std::size_t> buckets;
            for (std::size_t b = 0; b < mid_dim_; ++b) {
                if (count[b] == 0) continue;
                bucket_index[b] = buckets.size();
                buckets.push_back(b);
            }
            DenseMatrix g(out_dim_, buckets.size());
            std::vector<double> col(out_dim_);
            for (std::size_t bi = 0; bi < buckets.size(); ++bi) {
                std::fill(col.begin(), col.end(), 0.0);
                const double w =
                    scale_ * std::sqrt(static_cast<double>(count[buckets[bi]]));
                outer.add_column(buckets[bi], w, col.data());
                for (std::size_t r = 0; r < out_dim_; ++r) g(r, bi) = col[r];
            }
            const DenseMatrix x = linalg::pinv(g) * n;
            DenseMatrix out(in_dim_, n.cols());
            for (std::size_t j = 0; j < in_dim_; ++j) {
                const std::size_t b = cs.hash_[j];
                const double w = static_cast<double>(cs.sign_[j]) /
                                 std::sqrt(static_cast<double>(count[b]));
                const std::size_t bi = bucket_index[b];
                for (std::size_t c = 0; c < n.cols(); ++c) out(j, c) = w * x(bi, c);
            }
            return out;
        }
        default:
            throw std::invalid_argument("pinv_apply: only Srht and SrhtCountSketch supported");
    }
}

std::string SketchOperator::to_json_string() const {
    nlohmann::json j{{"kind", kind_name(kind_)},
                     {"out_dim", out_dim_},
                     {"in_dim", in_dim_},
                     {"seed", seed_},
                     {"scale", scale_}};
    if (kind_ == Kind::SrhtCountSketch) j["mid_dim"] = mid_dim_;
    return j.dump();
}

SketchOperator SketchOperator::from_json_string(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const Kind kind = kind_from_name(j.at("kind").get<std::string>());
    const auto out_dim = j.at("out_dim").get<std::size_t>();
    const auto in_dim = j.at("in_dim").get<std::size_t>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    const auto scale = j.at("scale").get<double>();
    if (kind == Kind::SrhtCountSketch)
        return sample_composed(out_dim, j.at("mid_dim").get<std::size_t>(), in_dim, seed, scale);
    return sample(kind, out_dim, in_dim, seed, scale);
}

DenseMatrix apply_left(const SketchOperator& op, const DenseMatrix& a) {
    return op.apply_left(a);
}

DenseMatrix apply_right(const DenseMatrix& a, const SketchOperator& op) {
    return op.apply_right(a);
}

void apply_update(const SketchOperator& op, Side side, std::size_t i, std::size_t j,
                  double delta, DenseMatrix& target) {
    if (side == Side::Left) {
        if (i >= op.in_dim()) throw std::out_of_range("apply_update: row index out of range");
        if (target.rows() != op.out_dim() || j >= target.cols())
            throw std::out_of_range("apply_update: target shape mismatch");
        if (delta == 0.0) return;
        if (const auto e = op.single_entry(i)) {
            target(e->first, j) += delta * e->second;
            return;
        }
        std::vector<double> col(op.out_dim(), 0.0);
        op.add_column(i, delta, col.data());
        for (std::size_t r = 0; r < op.out_dim(); ++r) target(r, j) += col[r];
    } else {
        if (j >= op.in_dim()) throw std::out_of_range("apply_update: col index out of range");
        if (target.cols() != op.out_dim() || i >= target.rows())
            throw std::out_of_range("apply_update: target shape mismatch");
        if (delta == 0.0) return;
        if (const auto e = op.single_entry(j)) {
            target(i, e->first) += delta * e->second;
            return;
        }
        std::vector<double> col(op.out_dim(), 0.0);
        op.add_column(j, delta, col.data());
        auto dst = target.row(i);
        for (std::size_t r = 0; r < op.out_dim(); ++r) dst[r] += col[r];
    }
}

DenseMatrix pinv_apply(const SketchOperator& op, const DenseMatrix& n) {
    return op.pinv_apply(n);
}

}  // namespace sketchlrf::sketch
