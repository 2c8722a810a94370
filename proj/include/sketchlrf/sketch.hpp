#ifndef SKETCHLRF_SKETCH_HPP
#define SKETCHLRF_SKETCH_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sketchlrf/matrix.hpp"

namespace sketchlrf::sketch {

enum class Kind { CountSketch, Srht, Gaussian, SrhtCountSketch };

std::string kind_name(Kind k);
Kind kind_from_name(const std::string& name);

enum class PrivacyLevel { Priv1, Priv2 };

/// Sketch dimensions t (regression embedding) and v (affine embedding),
/// before clamping to the ambient dimensions.
struct EmbeddingDims {
    std::size_t t = 1;
    std::size_t v = 1;
    double constant_c = 4.0;
};

EmbeddingDims dims_nonprivate(std::size_t k, double alpha, double c = 4.0);
EmbeddingDims dims_private(std::size_t k, double alpha, double delta, PrivacyLevel level,
                           double c = 4.0);

/// Scale that makes E||Sx||^2 = ||x||^2 for the given operator shape.
double embedding_scale(Kind kind, std::size_t out_dim, std::size_t in_dim);

std::size_t next_pow2(std::size_t n);

/// A sampled random linear map, deterministic in (kind, dims, seed, scale).
/// The materialized matrix is out_dim x in_dim; payloads are regenerated from
/// the seed and never serialized.
class SketchOperator {
  public:
    static SketchOperator sample(Kind kind, std::size_t out_dim, std::size_t in_dim,
                                 std::uint64_t seed, double scale = 1.0);
    /// SRHT composed with a CountSketch inner stage of width mid_dim
    /// (power of two, out_dim <= mid_dim <= in_dim).
    static SketchOperator sample_composed(std::size_t out_dim, std::size_t mid_dim,
                                          std::size_t in_dim, std::uint64_t seed,
                                          double scale = 1.0);

    Kind kind() const { return kind_; }
    std::size_t out_dim() const { return out_dim_; }
    std::size_t in_dim() const { return in_dim_; }
    std::size_t mid_dim() const { return mid_dim_; }
    std::size_t pad_dim() const { return pad_dim_; }
    std::uint64_t seed() const { return seed_; }
    double scale() const { return scale_; }

    /// M * a (a is in_dim x n).
    DenseMatrix apply_left(const DenseMatrix& a) const;
    /// a * M^T (a is m x in_dim).
    DenseMatrix apply_right(const DenseMatrix& a) const;

    /// Adds coeff * M(:, j) into out[0..out_dim).
    void add_column(std::size_t j, double coeff, double* out) const;
    /// For 1-sparse columns (CountSketch): the single (row, value) entry.
    std::optional<std::pair<std::size_t, double>> single_entry(std::size_t j) const;

    /// Moore-Penrose pseudo-inverse action S^+ * n (Srht and SrhtCountSketch only).
    DenseMatrix pinv_apply(const DenseMatrix& n) const;
    /// Factor s such that ||S^+ N||_F ~= ||N||_F / s (exact for power-of-two SRHT).
    double pinv_isometry_scale() const;

    DenseMatrix materialize() const;

    // payload access for tests
    const std::vector<std::size_t>& hash_targets() const { return hash_; }
    const std::vector<std::int8_t>& signs() const { return sign_; }
    const std::vector<std::size_t>& selected_rows() const { return rows_; }
    const std::vector<std::int8_t>& rademacher() const { return diag_; }

    std::string to_json_string() const;
    static SketchOperator from_json_string(const std::string& text);

  private:
    SketchOperator() = default;

    Kind kind_ = Kind::CountSketch;
    std::size_t out_dim_ = 0;
    std::size_t in_dim_ = 0;
    std::size_t mid_dim_ = 0;  // SrhtCountSketch only
    std::size_t pad_dim_ = 0;  // Srht only
    std::uint64_t seed_ = 0;
    double scale_ = 1.0;

    std::vector<std::size_t> hash_;   // CountSketch row targets
    std::vector<std::int8_t> sign_;   // CountSketch column signs
    std::vector<std::int8_t> diag_;   // Srht Rademacher diagonal (pad_dim)
    std::vector<std::size_t> rows_;   // Srht selected rows, distinct in [pad_dim)

    // sub-operators of the composed kind
    std::vector<SketchOperator> parts_;
};

enum class Side { Left, Right };

DenseMatrix apply_left(const SketchOperator& op, const DenseMatrix& a);
DenseMatrix apply_right(const DenseMatrix& a, const SketchOperator& op);

/// Fold the sketch of the rank-one update delta * e_i e_j^T into target.
/// side == Left: target is M * A (out x n), update touches column j.
/// side == Right: target is A * M^T (m x out), update touches row i.
void apply_update(const SketchOperator& op, Side side, std::size_t i, std::size_t j,
                  double delta, DenseMatrix& target);

DenseMatrix pinv_apply(const SketchOperator& op, const DenseMatrix& n);

/// In-place fast Walsh-Hadamard transform; length must be a power of two.
void fwht(double* data, std::size_t n);

}  // namespace sketchlrf::sketch

#endif  // SKETCHLRF_SKETCH_HPP
