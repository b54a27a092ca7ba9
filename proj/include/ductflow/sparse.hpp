#ifndef DUCTFLOW_SPARSE_HPP
#define DUCTFLOW_SPARSE_HPP

#include "ductflow/common.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace ductflow {

/// Unordered (row, col, value) entries. Duplicates are allowed and are summed
/// when converting to compressed form. An entry whose summed value is zero is
/// kept as an explicit stored zero, so the assembled pattern depends only on
/// which slots were touched, never on the values.
template <typename Scalar = double>
struct TripletBuffer {
  struct Entry {
    Index row;
    Index col;
    Scalar value;
  };
  std::vector<Entry> entries;

  void add(Index row, Index col, Scalar value) { entries.push_back({row, col, value}); }
  void reserve(std::size_t n) { entries.reserve(n); }
  std::size_t size() const { return entries.size(); }
};

/// Compressed sparse row matrix. Immutable in structure once built; values may
/// be rewritten in place through values() as long as the pattern is untouched.
template <typename Scalar = double>
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(Index n_rows, Index n_cols, std::vector<Index> row_ptr,
            std::vector<Index> col_idx, std::vector<Scalar> values)
      : n_rows_(n_rows),
        n_cols_(n_cols),
        row_ptr_(std::move(row_ptr)),
        col_idx_(std::move(col_idx)),
        values_(std::move(values)) {}

  Index rows() const { return n_rows_; }
  Index cols() const { return n_cols_; }
  Index nnz() const { return static_cast<Index>(col_idx_.size()); }

  const std::vector<Index>& row_ptr() const { return row_ptr_; }
  const std::vector<Index>& col_idx() const { return col_idx_; }
  const std::vector<Scalar>& values() const { return values_; }
  std::vector<Scalar>& values() { return values_; }

  Index row_begin(Index r) const { return row_ptr_[r]; }
  Index row_end(Index r) const { return row_ptr_[r + 1]; }

  /// Stored value at (r, c), or zero when the slot is not part of the pattern.
  Scalar coeff(Index r, Index c) const {
    const Index* b = col_idx_.data() + row_ptr_[r];
    const Index* e = col_idx_.data() + row_ptr_[r + 1];
    const Index* it = std::lower_bound(b, e, c);
    if (it != e && *it == c) return values_[static_cast<std::size_t>(it - col_idx_.data())];
    return Scalar{0};
  }

  Vector operator*(const Vector& x) const {
    if (x.size() != n_cols_)
      throw std::invalid_argument("matvec: vector length " + std::to_string(x.size()) +
                                  " does not match " + std::to_string(n_cols_) + " columns");
    Vector y(n_rows_);
    for (Index r = 0; r < n_rows_; ++r) {
      Scalar acc{0};
      for (Index t = row_ptr_[r]; t < row_ptr_[r + 1]; ++t) acc += values_[t] * x[col_idx_[t]];
      y[r] = acc;
    }
    return y;
  }

  /// Max absolute row sum.
  Scalar inf_norm() const {
    Scalar m{0};
    for (Index r = 0; r < n_rows_; ++r) {
      Scalar s{0};
      for (Index t = row_ptr_[r]; t < row_ptr_[r + 1]; ++t) s += std::abs(values_[t]);
      if (s > m) m = s;
    }
    return m;
  }

  /// Largest entry magnitude.
  Scalar max_abs() const {
    Scalar m{0};
    for (const Scalar v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  Index n_rows_ = 0;
  Index n_cols_ = 0;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> col_idx_;
  std::vector<Scalar> values_;
};

template <typename Scalar>
CsrMatrix<Scalar> from_triplets(const TripletBuffer<Scalar>& buf, Index n_rows, Index n_cols) {
  for (const auto& e : buf.entries) {
    if (e.row < 0 || e.row >= n_rows || e.col < 0 || e.col >= n_cols)
      throw std::invalid_argument("from_triplets: entry (" + std::to_string(e.row) + "," +
                                  std::to_string(e.col) + ") outside " + std::to_string(n_rows) +
                                  "x" + std::to_string(n_cols));
  }
  // Counting sort by row, then sort each row by column and merge duplicates.
  std::vector<Index> row_ptr(static_cast<std::size_t>(n_rows) + 1, 0);
  for (const auto& e : buf.entries) ++row_ptr[e.row + 1];
  for (Index r = 0; r < n_rows; ++r) row_ptr[r + 1] += row_ptr[r];

  std::vector<Index> cols(buf.entries.size());
  std::vector<Scalar> vals(buf.entries.size());
  {
    std::vector<Index> next(row_ptr.begin(), row_ptr.end() - 1);
    for (const auto& e : buf.entries) {
      const Index slot = next[e.row]++;
      cols[slot] = e.col;
      vals[slot] = e.value;
    }
  }

  std::vector<Index> out_ptr(static_cast<std::size_t>(n_rows) + 1, 0);
  std::vector<Index> out_cols;
  std::vector<Scalar> out_vals;
  out_cols.reserve(buf.entries.size());
  out_vals.reserve(buf.entries.size());
  std::vector<Index> order;
  for (Index r = 0; r < n_rows; ++r) {
    const Index b = row_ptr[r], e = row_ptr[r + 1];
    order.resize(e - b);
    std::iota(order.begin(), order.end(), b);
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b2) { return cols[a] < cols[b2]; });
    for (std::size_t k = 0; k < order.size();) {
      const Index c = cols[order[k]];
      Scalar sum{0};
      while (k < order.size() && cols[order[k]] == c) sum += vals[order[k++]];
      out_cols.push_back(c);
      out_vals.push_back(sum);
    }
    out_ptr[r + 1] = static_cast<Index>(out_cols.size());
  }
  return CsrMatrix<Scalar>(n_rows, n_cols, std::move(out_ptr), std::move(out_cols),
                           std::move(out_vals));
}

template <typename Scalar>
TripletBuffer<Scalar> to_triplets(const CsrMatrix<Scalar>& A) {
  TripletBuffer<Scalar> buf;
  buf.reserve(A.nnz());
  for (Index r = 0; r < A.rows(); ++r)
    for (Index t = A.row_begin(r); t < A.row_end(r); ++t)
      buf.add(r, A.col_idx()[t], A.values()[t]);
  return buf;
}

template <typename Scalar>
CsrMatrix<Scalar> transpose(const CsrMatrix<Scalar>& A) {
  std::vector<Index> ptr(static_cast<std::size_t>(A.cols()) + 1, 0);
  for (Index t = 0; t < A.nnz(); ++t) ++ptr[A.col_idx()[t] + 1];
  for (Index c = 0; c < A.cols(); ++c) ptr[c + 1] += ptr[c];
  std::vector<Index> cols(A.nnz());
  std::vector<Scalar> vals(A.nnz());
  std::vector<Index> next(ptr.begin(), ptr.end() - 1);
  for (Index r = 0; r < A.rows(); ++r)
    for (Index t = A.row_begin(r); t < A.row_end(r); ++t) {
      const Index slot = next[A.col_idx()[t]]++;
      cols[slot] = r;
      vals[slot] = A.values()[t];
    }
  return CsrMatrix<Scalar>(A.cols(), A.rows(), std::move(ptr), std::move(cols), std::move(vals));
}

/// Pattern of A + A^T + I with unit values; the adjacency structure used by the
/// ordering and analysis routines. Input must be square.
template <typename Scalar>
CsrMatrix<Scalar> symmetrized_pattern(const CsrMatrix<Scalar>& A) {
  if (A.rows() != A.cols())
    throw std::invalid_argument("symmetrized_pattern: matrix is not square");
  TripletBuffer<Scalar> buf;
  buf.reserve(2 * static_cast<std::size_t>(A.nnz()) + A.rows());
  for (Index r = 0; r < A.rows(); ++r) {
    buf.add(r, r, Scalar{0});
    for (Index t = A.row_begin(r); t < A.row_end(r); ++t) {
      buf.add(r, A.col_idx()[t], Scalar{0});
      buf.add(A.col_idx()[t], r, Scalar{0});
    }
  }
  CsrMatrix<Scalar> S = from_triplets(buf, A.rows(), A.rows());
  std::fill(S.values().begin(), S.values().end(), Scalar{1});
  return S;
}

/// Principal submatrix on `rows` (sorted global indices), preserving stored
/// zeros. `global_to_local` must map the selected indices to 0..rows.size()-1
/// and everything else to -1.
template <typename Scalar>
CsrMatrix<Scalar> extract_principal_submatrix(const CsrMatrix<Scalar>& A,
                                              const std::vector<Index>& rows,
                                              const std::vector<Index>& global_to_local) {
  const Index n = static_cast<Index>(rows.size());
  std::vector<Index> ptr(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> cols;
  std::vector<Scalar> vals;
  for (Index lr = 0; lr < n; ++lr) {
    const Index g = rows[lr];
    for (Index t = A.row_begin(g); t < A.row_end(g); ++t) {
      const Index lc = global_to_local[A.col_idx()[t]];
      if (lc >= 0) {
        cols.push_back(lc);
        vals.push_back(A.values()[t]);
      }
    }
    ptr[lr + 1] = static_cast<Index>(cols.size());
  }
  return CsrMatrix<Scalar>(n, n, std::move(ptr), std::move(cols), std::move(vals));
}

/// MatrixMarket coordinate format, general real. Used for test fixtures.
template <typename Scalar>
void write_matrix_market(const CsrMatrix<Scalar>& A, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << A.rows() << " " << A.cols() << " " << A.nnz() << "\n";
  char line[64];
  for (Index r = 0; r < A.rows(); ++r)
    for (Index t = A.row_begin(r); t < A.row_end(r); ++t) {
      std::snprintf(line, sizeof(line), "%d %d %.17g\n", r + 1, A.col_idx()[t] + 1,
                    static_cast<double>(A.values()[t]));
      out << line;
    }
}

template <typename Scalar = double>
CsrMatrix<Scalar> read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  bool symmetric = false;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw std::runtime_error(path + ": missing MatrixMarket banner");
  if (line.find("symmetric") != std::string::npos) symmetric = true;
  while (std::getline(in, line) && (line.empty() || line[0] == '%')) {
  }
  std::istringstream header(line);
  Index n_rows = 0, n_cols = 0;
  long long nnz = 0;
  header >> n_rows >> n_cols >> nnz;
  TripletBuffer<Scalar> buf;
  buf.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
  for (long long k = 0; k < nnz; ++k) {
    Index r, c;
    double v;
    if (!(in >> r >> c >> v)) throw std::runtime_error(path + ": truncated entry list");
    buf.add(r - 1, c - 1, static_cast<Scalar>(v));
    if (symmetric && r != c) buf.add(c - 1, r - 1, static_cast<Scalar>(v));
  }
  return from_triplets(buf, n_rows, n_cols);
}

}  // namespace ductflow

#endif
