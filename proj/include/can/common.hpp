#pragma once

#include <Eigen/Dense>

namespace can {

// Tokens are rows throughout: a T x d matrix holds T tokens of width d.
template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = MatX<float>;
using MatD = MatX<double>;
using VecF = VecX<float>;
using VecD = VecX<double>;

}  // namespace can
