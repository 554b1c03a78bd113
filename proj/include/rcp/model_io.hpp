#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "rcp/calibrate.hpp"
#include "rcp/core.hpp"

namespace rcp {

/// A calibrated model plus the covariate standardizer applied before it.
/// Exactly one of scp / rcp is set.
struct ModelBundle {
  Standardizer covariates;
  std::optional<ScpModel> scp;
  std::optional<RcpModel> rcp;

  bool is_rcp() const noexcept { return rcp.has_value(); }
  const ScoreFunction& score() const;
  double alpha() const;
  double threshold() const;

  /// Inputs are raw (unstandardized) covariates.
  bool contains(const Vector& x, const Vector& y) const;
  SetGeometry set(const Vector& x) const;
  /// Cutoff on the base score at x (the threshold itself for SCP).
  double base_level(const Vector& x) const;
};

/// Container layout: text header of key=value lines closed by "END_HEADER",
/// then tagged binary sections (4-byte tag, u64 length, payload). Network
/// weights are embedded as RCPN snapshots.
void save_model(std::ostream& out, const ModelBundle& model);
void save_model(const std::string& path, const ModelBundle& model);
ModelBundle load_model(std::istream& in);
ModelBundle load_model(const std::string& path);

}  // namespace rcp
