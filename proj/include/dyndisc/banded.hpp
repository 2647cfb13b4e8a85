#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dyndisc {

enum class BandStructure { LmmBlock, Augmented };

/// Row-banded matrix: row r stores `bandwidth` entries starting at column
/// r + col_offset. Entries outside the band or outside [0, n_cols) are zero.
///
/// The LMM block B_h has col_offset 0; the augmented square matrix A_h has
/// col_offset -(bandwidth-1) so that the last stored entry of each row sits
/// on the diagonal.
class BandedLowerMatrix {
 public:
  BandedLowerMatrix() = default;
  BandedLowerMatrix(int n_rows, int n_cols, int bandwidth, int col_offset, BandStructure structure);

  [[nodiscard]] int rows() const { return n_rows_; }
  [[nodiscard]] int cols() const { return n_cols_; }
  [[nodiscard]] int bandwidth() const { return bandwidth_; }
  [[nodiscard]] int col_offset() const { return col_offset_; }
  [[nodiscard]] BandStructure structure() const { return structure_; }
  [[nodiscard]] bool square() const { return n_rows_ == n_cols_; }

  /// Stored entry j (0-based within the band) of row r.
  [[nodiscard]] double& band(int r, int j) { return values_[static_cast<std::size_t>(r) * bandwidth_ + j]; }
  [[nodiscard]] double band(int r, int j) const { return values_[static_cast<std::size_t>(r) * bandwidth_ + j]; }

  [[nodiscard]] double operator()(int r, int c) const;

  [[nodiscard]] std::vector<double> multiply(std::span<const double> x) const;
  [[nodiscard]] std::vector<double> multiply_transpose(std::span<const double> y) const;

  /// Solves A x = b in order of increasing row index. Requires a square
  /// lower-triangular matrix; throws Error(SingularMatrix) on a zero diagonal.
  [[nodiscard]] std::vector<double> solve_lower(std::span<const double> b) const;
  /// Solves A^T x = b by back substitution.
  [[nodiscard]] std::vector<double> solve_lower_transpose(std::span<const double> b) const;

  [[nodiscard]] bool is_lower_triangular() const;
  [[nodiscard]] Eigen::MatrixXd to_dense() const;

 private:
  int n_rows_ = 0;
  int n_cols_ = 0;
  int bandwidth_ = 0;
  int col_offset_ = 0;
  BandStructure structure_ = BandStructure::LmmBlock;
  std::vector<double> values_;
};

}  // namespace dyndisc
