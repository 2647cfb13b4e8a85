#include "dyndisc/banded.hpp"

#include <algorithm>
#include <string>

#include "dyndisc/error.hpp"

namespace dyndisc {

BandedLowerMatrix::BandedLowerMatrix(int n_rows, int n_cols, int bandwidth, int col_offset,
                                     BandStructure structure)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      bandwidth_(bandwidth),
      col_offset_(col_offset),
      structure_(structure),
      values_(static_cast<std::size_t>(n_rows) * bandwidth, 0.0) {
  if (n_rows < 0 || n_cols < 0 || bandwidth < 1) {
    throw Error(ErrorCode::InvalidArgument, "invalid banded matrix shape");
  }
}

double BandedLowerMatrix::operator()(int r, int c) const {
  const int j = c - (r + col_offset_);
  if (j < 0 || j >= bandwidth_ || c < 0 || c >= n_cols_) return 0.0;
  return band(r, j);
}

std::vector<double> BandedLowerMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(n_rows_, 0.0);
  for (int r = 0; r < n_rows_; ++r) {
    const int c0 = r + col_offset_;
    double acc = 0.0;
    for (int j = std::max(0, -c0); j < bandwidth_ && c0 + j < n_cols_; ++j) acc += band(r, j) * x[c0 + j];
    y[r] = acc;
  }
  return y;
}

std::vector<double> BandedLowerMatrix::multiply_transpose(std::span<const double> y) const {
  std::vector<double> x(n_cols_, 0.0);
  for (int r = 0; r < n_rows_; ++r) {
    const int c0 = r + col_offset_;
    for (int j = std::max(0, -c0); j < bandwidth_ && c0 + j < n_cols_; ++j) x[c0 + j] += band(r, j) * y[r];
  }
  return x;
}

bool BandedLowerMatrix::is_lower_triangular() const {
  if (!square()) return false;
  for (int r = 0; r < n_rows_; ++r) {
    for (int j = 0; j < bandwidth_; ++j) {
      const int c = r + col_offset_ + j;
      if (c > r && c < n_cols_ && band(r, j) != 0.0) return false;
    }
  }
  return true;
}

std::vector<double> BandedLowerMatrix::solve_lower(std::span<const double> b) const {
  if (!square() || col_offset_ + bandwidth_ - 1 > 0) {
    throw Error(ErrorCode::InvalidArgument, "forward substitution needs a square lower-triangular band");
  }
  const int diag = -col_offset_;
  std::vector<double> x(n_rows_, 0.0);
  for (int r = 0; r < n_rows_; ++r) {
    const double d = band(r, diag);
    if (d == 0.0) throw Error(ErrorCode::SingularMatrix, "zero diagonal at row " + std::to_string(r));
    const int c0 = r + col_offset_;
    double acc = b[r];
    for (int j = std::max(0, -c0); j < diag; ++j) acc -= band(r, j) * x[c0 + j];
    x[r] = acc / d;
  }
  return x;
}

std::vector<double> BandedLowerMatrix::solve_lower_transpose(std::span<const double> b) const {
  if (!square() || col_offset_ + bandwidth_ - 1 > 0) {
    throw Error(ErrorCode::InvalidArgument, "back substitution needs a square lower-triangular band");
  }
  const int diag = -col_offset_;
  std::vector<double> x(b.begin(), b.end());
  // Column-oriented: once x[r] is final, remove its contribution from rows above.
  for (int r = n_rows_ - 1; r >= 0; --r) {
    const double d = band(r, diag);
    if (d == 0.0) throw Error(ErrorCode::SingularMatrix, "zero diagonal at row " + std::to_string(r));
    x[r] /= d;
    const int c0 = r + col_offset_;
    for (int j = std::max(0, -c0); j < diag; ++j) x[c0 + j] -= band(r, j) * x[r];
  }
  return x;
}

Eigen::MatrixXd BandedLowerMatrix::to_dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_rows_, n_cols_);
  for (int r = 0; r < n_rows_; ++r) {
    const int c0 = r + col_offset_;
    for (int j = std::max(0, -c0); j < bandwidth_ && c0 + j < n_cols_; ++j) out(r, c0 + j) = band(r, j);
  }
  return out;
}

}  // namespace dyndisc
