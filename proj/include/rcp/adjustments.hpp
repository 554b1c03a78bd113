#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "rcp/scores.hpp"

namespace rcp {

enum class AdjustmentKind { additive, multiplicative, exp_additive, exp_multiplicative };

std::string to_string(AdjustmentKind kind);
AdjustmentKind parse_adjustment_kind(const std::string& name);

/// Real interval with optionally infinite ends. Finite ends are open.
struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double v) const noexcept { return v > lower && v < upper; }
  bool bounded_below() const noexcept { return std::isfinite(lower); }
};

/// Parametric transformation f_t(v) used to rectify conformity scores.
///
///   additive            f_t(v) = t + v        anchor 0   t in R       scores in R
///   multiplicative      f_t(v) = t * v        anchor 1   t in (0,inf) scores in (0,inf)
///   exp_additive        f_t(v) = exp(t + v)   anchor 0   t in R       scores in (1,inf)
///   exp_multiplicative  f_t(v) = exp(t * v)   anchor 1   t in (0,inf) scores in (1,inf)
///
/// For every t in the parameter domain v -> f_t(v) is strictly increasing, and
/// t -> f_t(anchor) is a continuous increasing bijection onto the score domain.
class AdjustmentFamily {
 public:
  explicit AdjustmentFamily(AdjustmentKind kind = AdjustmentKind::additive) : kind_(kind) {}

  AdjustmentKind kind() const noexcept { return kind_; }
  std::string name() const { return to_string(kind_); }
  double anchor() const noexcept;
  Interval t_domain() const noexcept;
  Interval v_domain() const noexcept;

  /// f_t(v). Throws DomainError if t is outside the parameter domain.
  double forward(double t, double v) const;

  /// The unique v with f_t(v) = w: the rectified score of a raw score w.
  double invert_in_v(double t, double w) const;

  /// The unique t with f_t(anchor) = s, i.e. the transformed score V_phi.
  double invert_in_t(double s) const;

 private:
  void require_t(double t) const;
  AdjustmentKind kind_;
};

struct DomainCheck {
  enum class Status { ok, shift_required, structural };
  Status status = Status::ok;
  /// Recommended uniform shift when status == shift_required.
  double shift = 0.0;
  std::string message;

  bool ok() const noexcept { return status == Status::ok; }
};

/// Checks that every score lies strictly inside the family's score domain.
/// Otherwise recommends the smallest shift, rounded up to one decimal, that
/// puts the minimum score at least 0.1 above the lower bound.
DomainCheck validate_domain(const AdjustmentFamily& family, std::span<const double> scores);

/// Structural compatibility of a family with a score kind: a family with a
/// bounded-below score domain cannot rectify a score that is unbounded below
/// (e.g. negative log densities), whatever shift is applied.
DomainCheck validate_structure(const AdjustmentFamily& family, ScoreKind score);

}  // namespace rcp
