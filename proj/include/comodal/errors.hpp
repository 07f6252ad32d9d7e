#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace comodal {

/// Base class for model-domain failures (as opposed to I/O or usage errors).
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A zone with no on-demand outflow, so driver movement is undefined there.
struct DegenerateZoneError : ModelError {
  Eigen::Index zone;
  explicit DegenerateZoneError(Eigen::Index z)
      : ModelError("degenerate zone " + std::to_string(z) +
                   ": no on-demand outflow"),
        zone(z) {}
};

/// Idle-driver count at or below zero where a positive count is required.
struct DegenerateSupplyError : ModelError {
  explicit DegenerateSupplyError(const std::string& what) : ModelError(what) {}
};

/// Required fleet outside the representable range (0, N0) of the supply curve.
struct InfeasibleSupplyError : ModelError {
  double required;
  double pool;
  InfeasibleSupplyError(double req, double n0)
      : ModelError("required drivers " + std::to_string(req) +
                   " outside (0, " + std::to_string(n0) + ")"),
        required(req),
        pool(n0) {}
};

/// Pickup + drop-off probability above one for some CTMC state.
struct InvalidRatesError : ModelError {
  Eigen::Index zone;
  int carried;
  InvalidRatesError(Eigen::Index z, int n)
      : ModelError("pick+drop probability exceeds 1 in zone " +
                   std::to_string(z) + " at load " + std::to_string(n)),
        zone(z),
        carried(n) {}
};

/// (I - P~) numerically singular: the zone chain is (near-)reducible.
struct SingularChainError : ModelError {
  Eigen::Index dest;
  explicit SingularChainError(Eigen::Index j)
      : ModelError("near-reducible zone chain: singular first-passage system "
                   "for destination " + std::to_string(j)),
        dest(j) {}
};

/// Existence condition for the effective idle supply violated in a zone.
struct InfeasibleRegionError : ModelError {
  Eigen::Index zone;
  double margin;
  InfeasibleRegionError(Eigen::Index z, double m)
      : ModelError("effective-idle-supply existence condition fails in zone " +
                   std::to_string(z) + " (margin " + std::to_string(m) + ")"),
        zone(z),
        margin(m) {}
};

}  // namespace comodal
