#pragma once

#include "comodal/types.hpp"

namespace comodal {

/// Driver movement chain over zones with mean transit times and expected
/// first-passage times (diagonal entries are first-return times).
struct ZoneChain {
  Matrix P;   // one-step zone transition probabilities
  Matrix S;   // mean transit times s_ij = w_i + t_ij (min)
  Matrix ET;  // expected first-passage times E[T_ij] (min)
};

/// Movement probabilities from on-demand order destinations.
/// Throws DegenerateZoneError on a zone with zero on-demand outflow.
Matrix zone_transition_matrix(const Matrix& lambda_r, const Matrix& lambda_do);

/// Like zone_transition_matrix, but degenerate zones become absorbing
/// self-loops instead of failing (used for chains over degenerate scenarios).
Matrix zone_transition_matrix_or_selfloop(const Matrix& lambda_r,
                                          const Matrix& lambda_do);

/// Mean transit times: idle cruising in the origin zone plus travel.
Matrix transit_times(const Vector& w_I, const Matrix& t);

/// Expected first-passage times for every ordered zone pair, diagonal =
/// expected first-return time. One dense solve per destination column.
/// Throws SingularChainError when (I - P~) is numerically singular.
Matrix first_passage_times(const Matrix& P, const Matrix& S);

ZoneChain make_zone_chain(const Matrix& lambda_r, const Matrix& lambda_do,
                          const Vector& w_I, const Matrix& t);

/// Mean flexible delivery time with geometric drop-off retries:
/// ET(i,j) + (1-p_j)/p_j * ET(j,j). The intra-zone case has no approach leg;
/// the first drop attempt happens in place, so only the retry term remains.
/// Destinations with p_drop below 1e-6 get an infinite-time sentinel.
Matrix flexible_delivery_time(const Matrix& ET, const Vector& p_drop_succ);

}  // namespace comodal
