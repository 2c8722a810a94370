#ifndef SKETCHLRF_MATRIX_HPP
#define SKETCHLRF_MATRIX_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sketchlrf {

/// Dense real matrix, row-major. The universal value type of the library.
/// Constructors taking entry data reject non-finite values.
class DenseMatrix {
  public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    DenseMatrix transposed() const;

    /// Columns [col_begin, col_end) as a new matrix.
    DenseMatrix columns(std::size_t col_begin, std::size_t col_end) const;
    /// Rows [row_begin, row_end) as a new matrix.
    DenseMatrix top_rows(std::size_t row_begin, std::size_t row_end) const;

    bool all_finite() const;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& a);

/// a^T * b without forming the transpose.
DenseMatrix gram_multiply(const DenseMatrix& a, const DenseMatrix& b);
/// a * b^T without forming the transpose.
DenseMatrix multiply_bt(const DenseMatrix& a, const DenseMatrix& b);

bool approx_equal(const DenseMatrix& a, const DenseMatrix& b, double atol);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

// Shared text format: header "rows cols", then rows*cols decimals row-major.
DenseMatrix read_matrix(const std::string& path);
void write_matrix(const std::string& path, const DenseMatrix& a);

}  // namespace sketchlrf

#endif  // SKETCHLRF_MATRIX_HPP
