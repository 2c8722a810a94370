#ifndef SKETCHLRF_STREAM_HPP
#define SKETCHLRF_STREAM_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sketchlrf/dp_calibration.hpp"
#include "sketchlrf/matrix.hpp"
#include "sketchlrf/sketch.hpp"

namespace sketchlrf::stream {

/// One turnstile update: A(row, col) += delta.
struct TurnstileUpdate {
    std::size_t row = 0;
    std::size_t col = 0;
    double delta = 0.0;
};

enum class Mode { NonPrivate, Priv1, Priv2 };

std::string mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct InitOptions {
    sketch::Kind regression_kind = sketch::Kind::CountSketch;  // Phi, Psi
    sketch::Kind affine_kind = sketch::Kind::CountSketch;      // S, T
    double constant_c = 4.0;
    /// Test hook: overrides the calibrated noise scales (and sigma_min floor).
    std::optional<dp::NoiseScales> scales_override;
};

/// Live sketch triple plus frozen operators. Shapes depend on mode:
///   NonPrivate: y_c = A Phi (m x t), y_r = Psi A (t x n), z = S A T^T (v x v)
///   Priv2:      y_c = A Phi (m x t), z = S A (v x n), y_r unused
///   Priv1:      sketches of the augmented (A | sigma_min I); when m > n the
///               state internally runs on A^T (transposed = true) so that the
///               augmented matrix is always u x (m+n) with u = min(m, n).
/// The state never buffers updates; its footprint is the sketches plus Omega.
struct SketchState {
    Mode mode = Mode::NonPrivate;
    std::size_t m = 0;  // logical row count of A
    std::size_t n = 0;  // logical column count of A
    std::size_t k = 0;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    sketch::EmbeddingDims dims;  // t, v after clamping
    std::optional<dp::PrivacyParams> privacy;
    dp::NoiseScales scales;

    std::optional<sketch::SketchOperator> phi;
    std::optional<sketch::SketchOperator> psi;
    std::optional<sketch::SketchOperator> s;
    std::optional<sketch::SketchOperator> t_op;
    DenseMatrix omega;  // Priv1: u x t standard Gaussian mixing matrix

    bool transposed = false;  // Priv1 case 2

    DenseMatrix y_c;
    DenseMatrix y_r;
    DenseMatrix z;
    std::size_t updates_seen = 0;

    /// Row j of the Priv1 mixed map t^{-1} Phi Omega, length t.
    std::vector<double> phi_hat_row(std::size_t j) const;
};

SketchState init_state(std::size_t m, std::size_t n, std::size_t k, double alpha,
                       std::uint64_t seed, Mode mode,
                       const std::optional<dp::PrivacyParams>& privacy = std::nullopt,
                       const InitOptions& options = {});

void ingest(SketchState& state, const TurnstileUpdate& update);

/// Feed every nonzero entry of a as one update (row-major order).
void ingest_matrix(SketchState& state, const DenseMatrix& a);

/// Line-oriented reader for the stream format: required header "% m n",
/// then "i j delta" per line; '#' starts a comment, blank lines are skipped.
class StreamReader {
  public:
    explicit StreamReader(const std::string& path);

    std::size_t m() const { return m_; }
    std::size_t n() const { return n_; }
    std::size_t count() const { return count_; }

    /// Next update in file order, or nullopt at end of file.
    std::optional<TurnstileUpdate> next();

  private:
    std::ifstream in_;
    std::string path_;
    std::size_t m_ = 0;
    std::size_t n_ = 0;
    std::size_t line_no_ = 0;
    std::size_t count_ = 0;
};

std::vector<TurnstileUpdate> read_stream(const std::string& path, std::size_t& m, std::size_t& n);

}  // namespace sketchlrf::stream

#endif  // SKETCHLRF_STREAM_HPP
