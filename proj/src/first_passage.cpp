#include "comodal/first_passage.hpp"

#include "comodal/errors.hpp"

#include <cmath>

namespace comodal {

namespace {

Matrix normalize_rows(const Matrix& flow, bool selfloop_on_zero) {
  const Index M = flow.rows();
  Matrix P = Matrix::Zero(M, M);
  for (Index i = 0; i < M; ++i) {
    const double total = flow.row(i).sum();
    if (total <= 0.0) {
      if (!selfloop_on_zero) throw DegenerateZoneError(i);
      P(i, i) = 1.0;
    } else {
      P.row(i) = flow.row(i) / total;
    }
  }
  return P;
}

}  // namespace

Matrix zone_transition_matrix(const Matrix& lambda_r, const Matrix& lambda_do) {
  return normalize_rows(lambda_r + lambda_do, false);
}

Matrix zone_transition_matrix_or_selfloop(const Matrix& lambda_r,
                                          const Matrix& lambda_do) {
  return normalize_rows(lambda_r + lambda_do, true);
}

Matrix transit_times(const Vector& w_I, const Matrix& t) {
  return t.colwise() + w_I;
}

Matrix first_passage_times(const Matrix& P, const Matrix& S) {
  const Index M = P.rows();
  Matrix ET(M, M);
  // Expected one-step transit time out of each zone.
  const Vector step = (P.array() * S.array()).rowwise().sum();
  if (M == 1) {
    ET(0, 0) = step(0);
    return ET;
  }
  Matrix A(M - 1, M - 1);
  Vector b(M - 1);
  for (Index j = 0; j < M; ++j) {
    // Remove destination row/column: E[T_.j] = step + P~ E[T_.j].
    Index r = 0;
    for (Index i = 0; i < M; ++i) {
      if (i == j) continue;
      Index c = 0;
      for (Index k = 0; k < M; ++k) {
        if (k == j) continue;
        A(r, c) = (i == k ? 1.0 : 0.0) - P(i, k);
        ++c;
      }
      b(r) = step(i);
      ++r;
    }
    Eigen::PartialPivLU<Matrix> lu(A);
    const Vector x = lu.solve(b);
    if (!x.allFinite() || (A * x - b).cwiseAbs().maxCoeff() >
                              1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff()))
      throw SingularChainError(j);
    r = 0;
    double ret = P(j, j) * S(j, j);
    for (Index i = 0; i < M; ++i) {
      if (i == j) continue;
      ET(i, j) = std::max(0.0, x(r));
      ret += P(j, i) * (S(j, i) + x(r));
      ++r;
    }
    // First return to j: one step out of j plus the passage back.
    ET(j, j) = ret;
  }
  return ET;
}

ZoneChain make_zone_chain(const Matrix& lambda_r, const Matrix& lambda_do,
                          const Vector& w_I, const Matrix& t) {
  ZoneChain chain;
  chain.P = zone_transition_matrix(lambda_r, lambda_do);
  chain.S = transit_times(w_I, t);
  chain.ET = first_passage_times(chain.P, chain.S);
  return chain;
}

Matrix flexible_delivery_time(const Matrix& ET, const Vector& p_drop_succ) {
  const Index M = ET.rows();
  Matrix t_df(M, M);
  for (Index j = 0; j < M; ++j) {
    const double p = p_drop_succ(j);
    if (p < 1e-6) {
      t_df.col(j).setConstant(kInf);
      continue;
    }
    const double retry = (1.0 - p) / p * ET(j, j);
    for (Index i = 0; i < M; ++i)
      t_df(i, j) = (i == j ? 0.0 : ET(i, j)) + retry;
  }
  return t_df;
}

}  // namespace comodal
