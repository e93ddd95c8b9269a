#include "logbel/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>

#include "logbel/error.hpp"

namespace logbel {

namespace {

// Power-of-two exponent that brings the largest magnitude into [0.5, 1).
// Returns 0 when there is nothing to rescale.
int balance_exponent(std::span<const double> data) {
  double peak = 0.0;
  for (double x : data) peak = std::max(peak, std::abs(x));
  if (peak == 0.0 || !std::isfinite(peak)) return 0;
  int e = 0;
  std::frexp(peak, &e);
  return e;
}

void shift_all(std::span<double> data, int shift) {
  for (double& x : data) x = std::ldexp(x, shift);
}

// Difference of two scaled arrays, relative to the peak of b.
double relative_gap(std::span<const double> a, long ea, std::span<const double> b, long eb) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  // Bring both to the exponent of b.
  const long shift = ea - eb;
  double peak = 0.0;
  double gap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double av = shift < -2000 ? 0.0 : std::ldexp(a[i], static_cast<int>(std::min(shift, 2000L)));
    peak = std::max(peak, std::abs(b[i]));
    gap = std::max(gap, std::abs(av - b[i]));
  }
  if (peak == 0.0) return gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return gap / peak;
}

}  // namespace

OpCounters& OpCounters::operator+=(const OpCounters& other) {
  matrix_vector_mults += other.matrix_vector_mults;
  matrix_matrix_mults += other.matrix_matrix_mults;
  equation_evals += other.equation_evals;
  scalar_mult_adds += other.scalar_mult_adds;
  return *this;
}

OpCounters operator-(OpCounters a, const OpCounters& b) {
  a.matrix_vector_mults -= b.matrix_vector_mults;
  a.matrix_matrix_mults -= b.matrix_matrix_mults;
  a.equation_evals -= b.equation_evals;
  a.scalar_mult_adds -= b.scalar_mult_adds;
  return a;
}

// ---------------------------------------------------------------------------
// ScaledVector

ScaledVector::ScaledVector(std::vector<double> values, long exponent)
    : mantissa_(std::move(values)), exponent_(exponent) {
  rebalance();
}

ScaledVector ScaledVector::ones(std::size_t n) { return ScaledVector(std::vector<double>(n, 1.0)); }

double ScaledVector::value(std::size_t i) const {
  const long e = std::clamp(exponent_, -100000L, 100000L);
  return std::ldexp(mantissa_[i], static_cast<int>(e));
}

std::vector<double> ScaledVector::values() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = value(i);
  return out;
}

std::vector<double> ScaledVector::normalized() const {
  double total = 0.0;
  for (double x : mantissa_) total += x;
  if (!(total > 0.0) || !std::isfinite(total)) return {};
  std::vector<double> out(mantissa_);
  for (double& x : out) x /= total;
  return out;
}

double ScaledVector::log_sum() const {
  double total = 0.0;
  for (double x : mantissa_) total += x;
  if (!(total > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(total) + static_cast<double>(exponent_) * std::numbers::ln2;
}

bool ScaledVector::all_zero() const {
  return std::all_of(mantissa_.begin(), mantissa_.end(), [](double x) { return x == 0.0; });
}

void ScaledVector::rebalance() {
  const int e = balance_exponent(mantissa_);
  if (e == 0) return;
  shift_all(mantissa_, -e);
  exponent_ += e;
}

// ---------------------------------------------------------------------------
// ScaledMatrix

ScaledMatrix::ScaledMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

ScaledMatrix::ScaledMatrix(std::size_t rows, std::size_t cols, std::vector<double> data, long exponent)
    : rows_(rows), cols_(cols), data_(std::move(data)), exponent_(exponent) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::kDimensionMismatch, "matrix data size does not match its shape");
  }
  rebalance();
}

ScaledMatrix ScaledMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorCode::kDimensionMismatch, "ragged matrix rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return ScaledMatrix(r, c, std::move(data));
}

ScaledMatrix ScaledMatrix::identity(std::size_t n) {
  ScaledMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.mantissa_at(i, i) = 1.0;
  m.rebalance();
  return m;
}

double ScaledMatrix::value(std::size_t r, std::size_t c) const {
  const long e = std::clamp(exponent_, -100000L, 100000L);
  return std::ldexp(mantissa_at(r, c), static_cast<int>(e));
}

std::vector<std::vector<double>> ScaledMatrix::to_rows() const {
  std::vector<std::vector<double>> out(rows_, std::vector<double>(cols_));
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out[r][c] = value(r, c);
  return out;
}

void ScaledMatrix::rebalance() {
  const int e = balance_exponent(data_);
  if (e == 0) return;
  shift_all(data_, -e);
  exponent_ += e;
}

// ---------------------------------------------------------------------------
// Selection

Selection::Selection(std::vector<std::size_t> column_of_row, std::size_t cols)
    : column_(std::move(column_of_row)), cols_(cols) {
  for (std::size_t c : column_) {
    if (c >= cols_) throw Error(ErrorCode::kDimensionMismatch, "selection column out of range");
  }
}

Selection Selection::identity(std::size_t n) {
  std::vector<std::size_t> cols(n);
  for (std::size_t i = 0; i < n; ++i) cols[i] = i;
  return Selection(std::move(cols), n);
}

ScaledMatrix Selection::to_dense() const {
  ScaledMatrix m(rows(), cols());
  for (std::size_t r = 0; r < rows(); ++r) m.mantissa_at(r, column_[r]) = 1.0;
  m.rebalance();
  return m;
}

// ---------------------------------------------------------------------------
// Products

ScaledVector multiply(const ScaledMatrix& m, const ScaledVector& v, OpCounters& ops) {
  if (m.cols() != v.size()) throw Error(ErrorCode::kDimensionMismatch, "matrix-vector shape mismatch");
  std::vector<double> out(m.rows(), 0.0);
  const auto mv = v.mantissa();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += m.mantissa_at(r, c) * mv[c];
    out[r] = acc;
  }
  ops.matrix_vector_mults += 1;
  ops.scalar_mult_adds += m.rows() * m.cols();
  return ScaledVector(std::move(out), m.exponent() + v.exponent());
}

ScaledVector multiply_transposed(const ScaledMatrix& m, const ScaledVector& v, OpCounters& ops) {
  if (m.rows() != v.size()) throw Error(ErrorCode::kDimensionMismatch, "transposed matrix-vector shape mismatch");
  std::vector<double> out(m.cols(), 0.0);
  const auto mv = v.mantissa();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double x = mv[r];
    if (x == 0.0) continue;
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m.mantissa_at(r, c) * x;
  }
  ops.matrix_vector_mults += 1;
  ops.scalar_mult_adds += m.rows() * m.cols();
  return ScaledVector(std::move(out), m.exponent() + v.exponent());
}

ScaledVector hadamard(const ScaledVector& a, const ScaledVector& b, OpCounters& ops) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "componentwise product of unequal lengths");
  std::vector<double> out(a.size());
  const auto am = a.mantissa();
  const auto bm = b.mantissa();
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = am[i] * bm[i];
  ops.scalar_mult_adds += a.size();
  return ScaledVector(std::move(out), a.exponent() + b.exponent());
}

ScaledMatrix multiply(const ScaledMatrix& a, const ScaledMatrix& b, OpCounters& ops) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::kDimensionMismatch, "matrix-matrix shape mismatch");
  std::vector<double> out(a.rows() * b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* row = out.data() + i * b.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double x = a.mantissa_at(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) row[j] += x * b.mantissa_at(k, j);
    }
  }
  ops.matrix_matrix_mults += 1;
  ops.scalar_mult_adds += a.rows() * a.cols() * b.cols();
  return ScaledMatrix(a.rows(), b.cols(), std::move(out), a.exponent() + b.exponent());
}

ScaledMatrix scale_columns(const ScaledMatrix& m, const ScaledVector& d, OpCounters& ops) {
  if (m.cols() != d.size()) throw Error(ErrorCode::kDimensionMismatch, "column scaling shape mismatch");
  std::vector<double> out(m.mantissa().begin(), m.mantissa().end());
  const auto dm = d.mantissa();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r * m.cols() + c] *= dm[c];
  ops.scalar_mult_adds += m.rows() * m.cols();
  return ScaledMatrix(m.rows(), m.cols(), std::move(out), m.exponent() + d.exponent());
}

ScaledMatrix scale_rows(const ScaledMatrix& m, const ScaledVector& d, OpCounters& ops) {
  if (m.rows() != d.size()) throw Error(ErrorCode::kDimensionMismatch, "row scaling shape mismatch");
  std::vector<double> out(m.mantissa().begin(), m.mantissa().end());
  const auto dm = d.mantissa();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r * m.cols() + c] *= dm[r];
  ops.scalar_mult_adds += m.rows() * m.cols();
  return ScaledMatrix(m.rows(), m.cols(), std::move(out), m.exponent() + d.exponent());
}

ScaledMatrix transpose(const ScaledMatrix& m) {
  std::vector<double> out(m.rows() * m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[c * m.rows() + r] = m.mantissa_at(r, c);
  return ScaledMatrix(m.cols(), m.rows(), std::move(out), m.exponent());
}

ScaledVector gather(const Selection& s, const ScaledVector& v) {
  if (s.cols() != v.size()) throw Error(ErrorCode::kDimensionMismatch, "gather shape mismatch");
  std::vector<double> out(s.rows());
  const auto vm = v.mantissa();
  for (std::size_t r = 0; r < s.rows(); ++r) out[r] = vm[s.column_of(r)];
  return ScaledVector(std::move(out), v.exponent());
}

ScaledVector scatter_add(const Selection& s, const ScaledVector& v) {
  if (s.rows() != v.size()) throw Error(ErrorCode::kDimensionMismatch, "scatter shape mismatch");
  std::vector<double> out(s.cols(), 0.0);
  const auto vm = v.mantissa();
  for (std::size_t r = 0; r < s.rows(); ++r) out[s.column_of(r)] += vm[r];
  return ScaledVector(std::move(out), v.exponent());
}

ScaledMatrix multiply(const ScaledMatrix& m, const Selection& s) {
  if (m.cols() != s.rows()) throw Error(ErrorCode::kDimensionMismatch, "matrix-selection shape mismatch");
  std::vector<double> out(m.rows() * s.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t k = 0; k < m.cols(); ++k) out[r * s.cols() + s.column_of(k)] += m.mantissa_at(r, k);
  return ScaledMatrix(m.rows(), s.cols(), std::move(out), m.exponent());
}

ScaledMatrix multiply(const Selection& s, const ScaledMatrix& m) {
  if (s.cols() != m.rows()) throw Error(ErrorCode::kDimensionMismatch, "selection-matrix shape mismatch");
  std::vector<double> out(s.rows() * m.cols());
  for (std::size_t r = 0; r < s.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r * m.cols() + c] = m.mantissa_at(s.column_of(r), c);
  return ScaledMatrix(s.rows(), m.cols(), std::move(out), m.exponent());
}

double max_relative_difference(const ScaledVector& a, const ScaledVector& b) {
  return relative_gap(a.mantissa(), a.exponent(), b.mantissa(), b.exponent());
}

double max_relative_difference(const ScaledMatrix& a, const ScaledMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  return relative_gap(a.mantissa(), a.exponent(), b.mantissa(), b.exponent());
}

}  // namespace logbel
