#ifndef DUCTFLOW_COMMON_HPP
#define DUCTFLOW_COMMON_HPP

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ductflow {

using Index = std::int32_t;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Vector = VectorX<double>;

/// Max-magnitude norm; zero-length vectors have norm 0.
template <typename Derived>
typename Derived::Scalar inf_norm(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  S m{0};
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    using std::abs;
    const S a = abs(v(i));
    if (a > m) m = a;
  }
  return m;
}

struct SingularMatrixError : std::runtime_error {
  SingularMatrixError(Index step_, const std::string& what_)
      : std::runtime_error(what_), step(step_) {}
  Index step;  // 1-based elimination step that failed
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what_, std::vector<double> history_)
      : std::runtime_error(what_), history(std::move(history_)) {}
  std::vector<double> history;  // update norms up to the failure
};

}  // namespace ductflow

#endif
