// Test-only oracles, independent of the library's solution paths.
#pragma once

#include "comodal/types.hpp"

#include <random>

namespace comodal::oracles {

/// Truncated path expansion of the first-passage recursion:
/// E_{k+1}[T_ij] = sum_m P_im (s_im + [m != j] E_k[T_mj]), E_0 = 0.
inline Matrix first_passage_path_expansion(const Matrix& P, const Matrix& S,
                                           int terms) {
  const Index M = P.rows();
  Matrix ET = Matrix::Zero(M, M);
  const Vector step = (P.array() * S.array()).rowwise().sum();
  for (int k = 0; k < terms; ++k) {
    Matrix next(M, M);
    for (Index j = 0; j < M; ++j) {
      for (Index i = 0; i < M; ++i) {
        double v = step(i);
        for (Index m = 0; m < M; ++m)
          if (m != j) v += P(i, m) * ET(m, j);
        next(i, j) = v;
      }
    }
    ET.swap(next);
  }
  // the recursion above fills E[T_ij] for walks that leave i immediately,
  // which is the first-return time on the diagonal
  return ET;
}

/// Row-stochastic matrix with entries bounded away from zero.
inline Matrix random_stochastic(std::mt19937_64& rng, Index M,
                                double floor = 0.05) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix P(M, M);
  for (Index i = 0; i < M; ++i) {
    for (Index j = 0; j < M; ++j) P(i, j) = floor + unit(rng);
    P.row(i) /= P.row(i).sum();
  }
  return P;
}

inline Matrix random_positive_matrix(std::mt19937_64& rng, Index M, double lo,
                                     double hi) {
  std::uniform_real_distribution<double> draw(lo, hi);
  Matrix S(M, M);
  for (Index i = 0; i < M; ++i)
    for (Index j = 0; j < M; ++j) S(i, j) = draw(rng);
  return S;
}

inline Vector random_positive_vector(std::mt19937_64& rng, Index M, double lo,
                                     double hi) {
  std::uniform_real_distribution<double> draw(lo, hi);
  Vector v(M);
  for (Index i = 0; i < M; ++i) v(i) = draw(rng);
  return v;
}

}  // namespace comodal::oracles
