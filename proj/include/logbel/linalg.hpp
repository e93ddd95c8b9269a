#pragma once

// Dense vectors and matrices carrying a shared power-of-two exponent.
//
// Every value is stored as mantissa * 2^exponent.  After each operation the
// mantissas are rebalanced so that the largest magnitude lies in [0.5, 1);
// the rebalancing multiplies by an exact power of two, so it introduces no
// rounding.  This keeps long products of likelihoods (deep trees, long
// chains of Diag products) out of the subnormal range while leaving the
// represented values exactly those of plain double arithmetic.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace logbel {

struct OpCounters {
  std::uint64_t matrix_vector_mults = 0;
  std::uint64_t matrix_matrix_mults = 0;
  std::uint64_t equation_evals = 0;
  std::uint64_t scalar_mult_adds = 0;

  OpCounters& operator+=(const OpCounters& other);
  friend OpCounters operator-(OpCounters a, const OpCounters& b);
  friend OpCounters operator+(OpCounters a, const OpCounters& b) { return a += b; }
  friend bool operator==(const OpCounters&, const OpCounters&) = default;
};

class ScaledVector {
 public:
  ScaledVector() = default;
  explicit ScaledVector(std::vector<double> values, long exponent = 0);

  static ScaledVector ones(std::size_t n);

  std::size_t size() const { return mantissa_.size(); }
  bool empty() const { return mantissa_.empty(); }
  std::span<const double> mantissa() const { return mantissa_; }
  long exponent() const { return exponent_; }

  // Represented value of entry i; may underflow to zero when the exponent
  // is very negative.
  double value(std::size_t i) const;
  std::vector<double> values() const;

  // Entries divided by their sum.  Returns an empty vector when the sum is
  // zero or not finite.
  std::vector<double> normalized() const;
  // log(sum of represented entries); -inf when the sum is zero.
  double log_sum() const;

  bool all_zero() const;

  // Multiplies by 2^shift; exact.
  void shift_exponent(long shift) { exponent_ += shift; }
  std::span<double> mutable_mantissa() { return mantissa_; }
  void rebalance();

 private:
  std::vector<double> mantissa_;
  long exponent_ = 0;
};

class ScaledMatrix {
 public:
  ScaledMatrix() = default;
  ScaledMatrix(std::size_t rows, std::size_t cols);
  // Row-major data.
  ScaledMatrix(std::size_t rows, std::size_t cols, std::vector<double> data, long exponent = 0);
  static ScaledMatrix from_rows(const std::vector<std::vector<double>>& rows);
  static ScaledMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  long exponent() const { return exponent_; }
  std::span<const double> mantissa() const { return data_; }
  std::span<double> mutable_mantissa() { return data_; }

  double mantissa_at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& mantissa_at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double value(std::size_t r, std::size_t c) const;
  std::vector<std::vector<double>> to_rows() const;

  void shift_exponent(long shift) { exponent_ += shift; }
  void rebalance();

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  long exponent_ = 0;
};

// A 0/1 matrix with exactly one 1 per row, stored as the column index of
// that 1.  Products with it are gathers and scatter-adds; they perform no
// multiplications and are counted as such.
class Selection {
 public:
  Selection() = default;
  Selection(std::vector<std::size_t> column_of_row, std::size_t cols);
  static Selection identity(std::size_t n);

  std::size_t rows() const { return column_.size(); }
  std::size_t cols() const { return cols_; }
  std::size_t column_of(std::size_t row) const { return column_[row]; }

  ScaledMatrix to_dense() const;

 private:
  std::vector<std::size_t> column_;
  std::size_t cols_ = 0;
};

// m . v
ScaledVector multiply(const ScaledMatrix& m, const ScaledVector& v, OpCounters& ops);
// m^T . v
ScaledVector multiply_transposed(const ScaledMatrix& m, const ScaledVector& v, OpCounters& ops);
// a * b (componentwise)
ScaledVector hadamard(const ScaledVector& a, const ScaledVector& b, OpCounters& ops);
// a . b
ScaledMatrix multiply(const ScaledMatrix& a, const ScaledMatrix& b, OpCounters& ops);
// m . Diag_d
ScaledMatrix scale_columns(const ScaledMatrix& m, const ScaledVector& d, OpCounters& ops);
// Diag_d . m
ScaledMatrix scale_rows(const ScaledMatrix& m, const ScaledVector& d, OpCounters& ops);
ScaledMatrix transpose(const ScaledMatrix& m);

// s . v  (gather)
ScaledVector gather(const Selection& s, const ScaledVector& v);
// s^T . v  (scatter-add)
ScaledVector scatter_add(const Selection& s, const ScaledVector& v);
// m . s  (column scatter-add): (r x s.rows()) times (s.rows() x s.cols())
ScaledMatrix multiply(const ScaledMatrix& m, const Selection& s);
// s . m  (row gather)
ScaledMatrix multiply(const Selection& s, const ScaledMatrix& m);

// Largest |a_i - b_i| over represented values, divided by max |b_i|.
// Exponents are aligned before subtracting, so the comparison works where
// the represented values would underflow.
double max_relative_difference(const ScaledVector& a, const ScaledVector& b);
double max_relative_difference(const ScaledMatrix& a, const ScaledMatrix& b);

}  // namespace logbel
