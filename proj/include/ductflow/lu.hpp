#ifndef DUCTFLOW_LU_HPP
#define DUCTFLOW_LU_HPP

#include "ductflow/ordering.hpp"
#include "ductflow/sparse.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>

namespace ductflow {

enum class OrderingMethod { MinDegree, NestedDissection };

/// Symbolic factorization plan. Valid for every matrix sharing the pattern it
/// was computed from; the numeric phase never grows or shrinks it.
///
/// The fill pattern is that of the symmetrized pattern A+A^T+I under the
/// chosen fill-reducing permutation. Rows with identical symmetrized patterns
/// are grouped into pivot blocks: row exchanges during the numeric phase stay
/// inside a block, which keeps the working pattern inside the plan for any
/// pivot choice.
template <typename Scalar = double>
struct SymbolicPlan {
  Index n = 0;
  Permutation perm;  // plan index -> original index
  OrderingMethod method = OrderingMethod::NestedDissection;

  // Strict lower / strict upper pattern per plan row, columns sorted.
  // lo row j doubles as the static pattern of U column j; up row k doubles as
  // the pattern capacity of L column k.
  std::vector<Index> lo_ptr, lo_idx;
  std::vector<Index> up_ptr, up_idx;

  std::vector<Index> block_start_of;  // plan row -> first row of its pivot block
  std::vector<Index> block_end_of;    // plan row -> one past last row of its block

  std::int64_t fill_nnz = 0;  // stored nonzeros of L+U, diagonal counted once

  std::int64_t factor_bytes() const {
    return fill_nnz * static_cast<std::int64_t>(sizeof(Scalar) + sizeof(Index));
  }
};

namespace detail {

// Group rows with identical closed neighborhoods in the symmetrized pattern
// (indistinguishable nodes). Returns group id per row; ids in order of first
// appearance, so a group's representative is its lowest row.
template <typename Scalar>
std::vector<Index> compress_groups(const CsrMatrix<Scalar>& S, Index& n_groups) {
  const Index n = S.rows();
  std::vector<Index> group(n, -1);
  std::vector<std::size_t> hash(n);
  for (Index r = 0; r < n; ++r) {
    std::size_t h = 1469598103934665603ull;
    for (Index t = S.row_begin(r); t < S.row_end(r); ++t) {
      h ^= static_cast<std::size_t>(S.col_idx()[t]) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    hash[r] = h;
  }
  std::vector<Index> by_hash(n);
  for (Index r = 0; r < n; ++r) by_hash[r] = r;
  std::sort(by_hash.begin(), by_hash.end(), [&](Index a, Index b) {
    if (hash[a] != hash[b]) return hash[a] < hash[b];
    return a < b;
  });
  auto rows_equal = [&](Index a, Index b) {
    const Index la = S.row_end(a) - S.row_begin(a);
    const Index lb = S.row_end(b) - S.row_begin(b);
    if (la != lb) return false;
    return std::equal(S.col_idx().begin() + S.row_begin(a),
                      S.col_idx().begin() + S.row_end(a),
                      S.col_idx().begin() + S.row_begin(b));
  };
  // Union rows with equal hash and equal pattern; representative = lowest id.
  std::vector<Index> rep(n);
  for (Index r = 0; r < n; ++r) rep[r] = r;
  std::vector<Index> reps_in_run;
  for (std::size_t q = 0; q < by_hash.size();) {
    std::size_t run_end = q;
    while (run_end < by_hash.size() && hash[by_hash[run_end]] == hash[by_hash[q]]) ++run_end;
    reps_in_run.clear();
    for (std::size_t w = q; w < run_end; ++w) {
      const Index r = by_hash[w];
      bool found = false;
      for (const Index rr : reps_in_run)
        if (rows_equal(rr, r)) {
          rep[r] = rr;
          found = true;
          break;
        }
      if (!found) reps_in_run.push_back(r);
    }
    q = run_end;
  }
  n_groups = 0;
  for (Index r = 0; r < n; ++r) {
    if (rep[r] == r) group[r] = n_groups++;
  }
  for (Index r = 0; r < n; ++r) group[r] = group[rep[r]];
  return group;
}

}  // namespace detail

/// Symbolic analysis with an explicit permutation (plan index -> original).
template <typename Scalar>
SymbolicPlan<Scalar> analyze_with_permutation(const CsrMatrix<Scalar>& A, Permutation perm,
                                              OrderingMethod method = OrderingMethod::NestedDissection) {
  if (A.rows() != A.cols()) throw std::invalid_argument("analyze: pattern is not square");
  const Index n = A.rows();
  if (perm.size() != n) throw std::invalid_argument("analyze: permutation size mismatch");
  const CsrMatrix<Scalar> S = symmetrized_pattern(A);

  SymbolicPlan<Scalar> plan;
  plan.n = n;
  plan.method = method;

  // Permuted symmetric pattern rows.
  const auto& inew = perm.inverse();

  // Up-looking symbolic factorization via elimination-tree path traversal.
  std::vector<Index> parent(n, -1), mark(n, -1);
  std::vector<std::vector<Index>> lo(n);
  for (Index i = 0; i < n; ++i) {
    mark[i] = i;
    const Index old_row = perm.old_of(i);
    for (Index t = S.row_begin(old_row); t < S.row_end(old_row); ++t) {
      Index j = inew[S.col_idx()[t]];
      while (j < i && mark[j] != i) {
        lo[i].push_back(j);
        mark[j] = i;
        if (parent[j] == -1) parent[j] = i;
        j = parent[j];
      }
    }
    std::sort(lo[i].begin(), lo[i].end());
  }

  std::int64_t lo_nnz = 0;
  for (const auto& row : lo) lo_nnz += static_cast<std::int64_t>(row.size());
  plan.lo_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  plan.lo_idx.reserve(static_cast<std::size_t>(lo_nnz));
  plan.up_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  for (Index i = 0; i < n; ++i) {
    for (const Index j : lo[i]) {
      plan.lo_idx.push_back(j);
      ++plan.up_ptr[j + 1];
    }
    plan.lo_ptr[i + 1] = static_cast<Index>(plan.lo_idx.size());
  }
  for (Index k = 0; k < n; ++k) plan.up_ptr[k + 1] += plan.up_ptr[k];
  plan.up_idx.resize(static_cast<std::size_t>(lo_nnz));
  {
    std::vector<Index> next(plan.up_ptr.begin(), plan.up_ptr.end() - 1);
    for (Index i = 0; i < n; ++i)
      for (Index t = plan.lo_ptr[i]; t < plan.lo_ptr[i + 1]; ++t)
        plan.up_idx[next[plan.lo_idx[t]]++] = i;  // ascending i per column
  }
  plan.fill_nnz = static_cast<std::int64_t>(n) + 2 * lo_nnz;

  // Pivot blocks: maximal runs of consecutive plan rows whose symmetrized
  // patterns are identical.
  Index n_groups = 0;
  const std::vector<Index> group = detail::compress_groups(S, n_groups);
  plan.block_start_of.resize(n);
  plan.block_end_of.resize(n);
  Index run_start = 0;
  for (Index i = 1; i <= n; ++i) {
    if (i == n || group[perm.old_of(i)] != group[perm.old_of(run_start)]) {
      for (Index r = run_start; r < i; ++r) {
        plan.block_start_of[r] = run_start;
        plan.block_end_of[r] = i;
      }
      run_start = i;
    }
  }
  plan.perm = std::move(perm);
  return plan;
}

/// Symbolic analysis: symmetrize, compress indistinguishable rows, order the
/// compressed graph with the requested method, expand, and compute the fill
/// pattern. The plan depends only on the pattern of A, never its values.
template <typename Scalar>
SymbolicPlan<Scalar> analyze(const CsrMatrix<Scalar>& A, OrderingMethod method) {
  if (A.rows() != A.cols()) throw std::invalid_argument("analyze: pattern is not square");
  const Index n = A.rows();
  const CsrMatrix<Scalar> S = symmetrized_pattern(A);

  Index n_groups = 0;
  const std::vector<Index> group = detail::compress_groups(S, n_groups);

  // Compressed graph over groups.
  TripletBuffer<Scalar> buf;
  for (Index r = 0; r < n; ++r)
    for (Index t = S.row_begin(r); t < S.row_end(r); ++t) {
      const Index gc = group[S.col_idx()[t]];
      if (group[r] != gc) buf.add(group[r], gc, Scalar{1});
    }
  for (Index g = 0; g < n_groups; ++g) buf.add(g, g, Scalar{1});
  const CsrMatrix<Scalar> C = from_triplets(buf, n_groups, n_groups);

  const Permutation gperm = method == OrderingMethod::MinDegree
                                ? min_degree(C)
                                : nested_dissection(C);

  std::vector<std::vector<Index>> members(n_groups);
  for (Index r = 0; r < n; ++r) members[group[r]].push_back(r);  // ascending
  std::vector<Index> perm;
  perm.reserve(n);
  for (Index k = 0; k < n_groups; ++k)
    for (const Index r : members[gperm.old_of(k)]) perm.push_back(r);

  return analyze_with_permutation(A, Permutation(std::move(perm)), method);
}

/// Numeric LU factors bound to a SymbolicPlan. Immutable; solve may be called
/// any number of times and is safe for concurrent readers.
template <typename Scalar = double>
class LuFactors {
 public:
  LuFactors(std::shared_ptr<const SymbolicPlan<Scalar>> plan, std::vector<Scalar> lval,
            std::vector<Index> lrow, std::vector<Scalar> uval, std::vector<Scalar> udiag,
            std::vector<Index> piv, Index n_perturbed)
      : plan_(std::move(plan)),
        lval_(std::move(lval)),
        lrow_(std::move(lrow)),
        uval_(std::move(uval)),
        udiag_(std::move(udiag)),
        piv_(std::move(piv)),
        n_perturbed_(n_perturbed) {}

  const SymbolicPlan<Scalar>& plan() const { return *plan_; }
  std::int64_t fill_nnz() const { return plan_->fill_nnz; }
  std::int64_t factor_bytes() const { return plan_->factor_bytes(); }
  Index perturbed_pivots() const { return n_perturbed_; }

  VectorX<Scalar> solve(const VectorX<Scalar>& b) const {
    const Index n = plan_->n;
    if (b.size() != n)
      throw std::invalid_argument("solve: rhs length " + std::to_string(b.size()) +
                                  " does not match dimension " + std::to_string(n));
    VectorX<Scalar> work(n), z(n);
    const auto& perm = plan_->perm;
    for (Index i = 0; i < n; ++i) work[i] = b[perm.old_of(i)];
    for (Index j = 0; j < n; ++j) {
      const Scalar zj = work[piv_[j]];
      z[j] = zj;
      if (zj != Scalar{0}) {
        for (Index t = plan_->up_ptr[j]; t < plan_->up_ptr[j + 1]; ++t)
          work[lrow_[t]] -= lval_[t] * zj;
      }
    }
    for (Index j = n; j-- > 0;) {
      const Scalar xj = z[j] / udiag_[j];
      z[j] = xj;
      if (xj != Scalar{0}) {
        for (Index t = plan_->lo_ptr[j]; t < plan_->lo_ptr[j + 1]; ++t)
          z[plan_->lo_idx[t]] -= uval_[t] * xj;
      }
    }
    VectorX<Scalar> x(n);
    for (Index j = 0; j < n; ++j) x[perm.old_of(j)] = z[j];
    return x;
  }

 private:
  std::shared_ptr<const SymbolicPlan<Scalar>> plan_;
  std::vector<Scalar> lval_;  // L columns, aligned with plan up_ptr slots
  std::vector<Index> lrow_;   // physical row of each L entry
  std::vector<Scalar> uval_;  // strict U columns, aligned with plan lo pattern
  std::vector<Scalar> udiag_;
  std::vector<Index> piv_;  // pivot column -> physical row
  Index n_perturbed_;
};

inline constexpr double kPivotThreshold = 0.1;

/// Left-looking column factorization over the plan's static pattern. Row
/// exchanges are confined to the plan's pivot blocks; a nonzero pivot smaller
/// than eps*max|A| is bumped to that magnitude and counted, an exactly zero
/// pivot column raises SingularMatrixError with its 1-based elimination step.
template <typename Scalar>
LuFactors<Scalar> factorize(std::shared_ptr<const SymbolicPlan<Scalar>> plan,
                            const CsrMatrix<Scalar>& A) {
  const SymbolicPlan<Scalar>& P = *plan;
  const Index n = P.n;
  if (A.rows() != n || A.cols() != n)
    throw std::invalid_argument("factorize: matrix does not match plan dimension");

  // Columns of the symmetrically permuted matrix M = A[p,p].
  const auto& inew = P.perm.inverse();
  std::vector<Index> cptr(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> crow(A.nnz());
  std::vector<Scalar> cval(A.nnz());
  for (Index t = 0; t < A.nnz(); ++t) ++cptr[inew[A.col_idx()[t]] + 1];
  for (Index c = 0; c < n; ++c) cptr[c + 1] += cptr[c];
  {
    std::vector<Index> next(cptr.begin(), cptr.end() - 1);
    for (Index r = 0; r < A.rows(); ++r)
      for (Index t = A.row_begin(r); t < A.row_end(r); ++t) {
        const Index slot = next[inew[A.col_idx()[t]]]++;
        crow[slot] = inew[r];
        cval[slot] = A.values()[t];
      }
  }

  const Scalar pivot_floor = std::numeric_limits<Scalar>::epsilon() * A.max_abs();

  std::vector<Scalar> lval(P.up_idx.size());
  std::vector<Index> lrow(P.up_idx.size());
  std::vector<Scalar> uval(P.lo_idx.size());
  std::vector<Scalar> udiag(n);
  std::vector<Index> piv(n, -1), pinv(n, -1);
  std::vector<Scalar> x(n, Scalar{0});
  std::vector<Index> stamp(n, -1);
  Index n_perturbed = 0;

  for (Index j = 0; j < n; ++j) {
    // Scatter pattern of column j (full symmetric row of the plan).
    for (Index t = P.lo_ptr[j]; t < P.lo_ptr[j + 1]; ++t) {
      x[P.lo_idx[t]] = Scalar{0};
      stamp[P.lo_idx[t]] = j;
    }
    x[j] = Scalar{0};
    stamp[j] = j;
    for (Index t = P.up_ptr[j]; t < P.up_ptr[j + 1]; ++t) {
      x[P.up_idx[t]] = Scalar{0};
      stamp[P.up_idx[t]] = j;
    }
    for (Index t = cptr[j]; t < cptr[j + 1]; ++t) {
      if (stamp[crow[t]] != j)
        throw std::invalid_argument("factorize: matrix entry outside the plan pattern");
      x[crow[t]] += cval[t];
    }

    // Eliminate against finished columns.
    for (Index t = P.lo_ptr[j]; t < P.lo_ptr[j + 1]; ++t) {
      const Index k = P.lo_idx[t];
      const Scalar ukj = x[piv[k]];
      uval[t] = ukj;
      if (ukj != Scalar{0}) {
        for (Index s = P.up_ptr[k]; s < P.up_ptr[k + 1]; ++s) x[lrow[s]] -= lval[s] * ukj;
      }
    }

    // Threshold pivoting inside the block.
    const Index b0 = P.block_start_of[j], b1 = P.block_end_of[j];
    Scalar vmax{0};
    Index arg_max = -1, natural = -1;
    for (Index r = b0; r < b1; ++r) {
      if (pinv[r] != -1) continue;
      if (natural == -1) natural = r;
      const Scalar a = std::abs(x[r]);
      if (a > vmax) {
        vmax = a;
        arg_max = r;
      }
    }
    if (vmax == Scalar{0})
      throw SingularMatrixError(j + 1, "factorize: singular matrix at elimination step " +
                                           std::to_string(j + 1));
    Index r_piv = (std::abs(x[natural]) >= kPivotThreshold * vmax) ? natural : arg_max;
    if (vmax < pivot_floor) {
      x[r_piv] = x[r_piv] < Scalar{0} ? -pivot_floor : pivot_floor;
      ++n_perturbed;
    }
    piv[j] = r_piv;
    pinv[r_piv] = j;
    udiag[j] = x[r_piv];

    // Remaining unpivoted rows of the pattern become column j of L.
    Index out = P.up_ptr[j];
    const Scalar inv_piv = Scalar{1} / udiag[j];
    for (Index t = P.lo_ptr[j]; t < P.lo_ptr[j + 1]; ++t) {
      const Index r = P.lo_idx[t];
      if (pinv[r] == -1) {
        lrow[out] = r;
        lval[out++] = x[r] * inv_piv;
      }
    }
    if (pinv[j] == -1) {
      lrow[out] = j;
      lval[out++] = x[j] * inv_piv;
    }
    for (Index t = P.up_ptr[j]; t < P.up_ptr[j + 1]; ++t) {
      const Index r = P.up_idx[t];
      if (pinv[r] == -1) {
        lrow[out] = r;
        lval[out++] = x[r] * inv_piv;
      }
    }
    if (out != P.up_ptr[j + 1])
      throw std::logic_error("factorize: pivot block bookkeeping violated the plan");
  }

  return LuFactors<Scalar>(std::move(plan), std::move(lval), std::move(lrow), std::move(uval),
                           std::move(udiag), std::move(piv), n_perturbed);
}

template <typename Scalar>
LuFactors<Scalar> factorize(const SymbolicPlan<Scalar>& plan, const CsrMatrix<Scalar>& A) {
  return factorize(std::make_shared<const SymbolicPlan<Scalar>>(plan), A);
}

}  // namespace ductflow

#endif
