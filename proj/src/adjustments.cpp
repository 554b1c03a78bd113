#include "rcp/adjustments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rcp {

namespace {
constexpr double kShiftMargin = 0.1;
}

std::string to_string(AdjustmentKind kind) {
  switch (kind) {
    case AdjustmentKind::additive: return "additive";
    case AdjustmentKind::multiplicative: return "multiplicative";
    case AdjustmentKind::exp_additive: return "exp_additive";
    case AdjustmentKind::exp_multiplicative: return "exp_multiplicative";
  }
  return "?";
}

AdjustmentKind parse_adjustment_kind(const std::string& name) {
  if (name == "additive" || name == "-") return AdjustmentKind::additive;
  if (name == "multiplicative" || name == "*") return AdjustmentKind::multiplicative;
  if (name == "exp_additive" || name == "exp-") return AdjustmentKind::exp_additive;
  if (name == "exp_multiplicative" || name == "exp*") return AdjustmentKind::exp_multiplicative;
  throw ArgumentError("unknown adjustment family '" + name + "'");
}

double AdjustmentFamily::anchor() const noexcept {
  switch (kind_) {
    case AdjustmentKind::additive:
    case AdjustmentKind::exp_additive: return 0.0;
    case AdjustmentKind::multiplicative:
    case AdjustmentKind::exp_multiplicative: return 1.0;
  }
  return 0.0;
}

Interval AdjustmentFamily::t_domain() const noexcept {
  switch (kind_) {
    case AdjustmentKind::additive:
    case AdjustmentKind::exp_additive: return {};
    case AdjustmentKind::multiplicative:
    case AdjustmentKind::exp_multiplicative: return {0.0, std::numeric_limits<double>::infinity()};
  }
  return {};
}

Interval AdjustmentFamily::v_domain() const noexcept {
  switch (kind_) {
    case AdjustmentKind::additive: return {};
    case AdjustmentKind::multiplicative: return {0.0, std::numeric_limits<double>::infinity()};
    case AdjustmentKind::exp_additive:
    case AdjustmentKind::exp_multiplicative: return {1.0, std::numeric_limits<double>::infinity()};
  }
  return {};
}

void AdjustmentFamily::require_t(double t) const {
  if (!t_domain().contains(t)) {
    std::ostringstream msg;
    msg << name() << ": parameter t = " << t << " violates the lower bound t > " << t_domain().lower;
    throw DomainError(msg.str());
  }
}

double AdjustmentFamily::forward(double t, double v) const {
  require_t(t);
  if (std::isnan(v)) throw DomainError(name() + ": NaN score");
  switch (kind_) {
    case AdjustmentKind::additive: return t + v;
    case AdjustmentKind::multiplicative: return t * v;
    case AdjustmentKind::exp_additive: return std::exp(t + v);
    case AdjustmentKind::exp_multiplicative: return std::exp(t * v);
  }
  return v;
}

double AdjustmentFamily::invert_in_v(double t, double w) const {
  require_t(t);
  if (std::isnan(w)) throw DomainError(name() + ": NaN score");
  switch (kind_) {
    case AdjustmentKind::additive: return w - t;
    case AdjustmentKind::multiplicative: return w / t;
    case AdjustmentKind::exp_additive:
    case AdjustmentKind::exp_multiplicative:
      if (!(w > 0.0)) {
        std::ostringstream msg;
        msg << name() << ": value " << w << " is outside the range (0, inf) of f_t";
        throw DomainError(msg.str());
      }
      return kind_ == AdjustmentKind::exp_additive ? std::log(w) - t : std::log(w) / t;
  }
  return w;
}

double AdjustmentFamily::invert_in_t(double s) const {
  const Interval dom = v_domain();
  if (!dom.contains(s)) {
    std::ostringstream msg;
    msg << name() << ": score " << s << " violates the lower bound " << dom.lower
        << "; apply a score shift so that every score exceeds it";
    const double needed = std::isfinite(s) ? std::ceil((dom.lower - s + kShiftMargin) * 10.0 - 1e-9) / 10.0 : 0.0;
    throw DomainError(msg.str(), needed);
  }
  switch (kind_) {
    case AdjustmentKind::additive:
    case AdjustmentKind::multiplicative: return s;
    case AdjustmentKind::exp_additive:
    case AdjustmentKind::exp_multiplicative: return std::log(s);
  }
  return s;
}

DomainCheck validate_domain(const AdjustmentFamily& family, std::span<const double> scores) {
  if (scores.empty()) throw ArgumentError("validate_domain: empty score list");
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  if (!std::isfinite(*lo_it) || !std::isfinite(*hi_it)) {
    return {DomainCheck::Status::structural, 0.0, "non-finite scores cannot be rectified"};
  }
  const Interval dom = family.v_domain();
  if (!dom.bounded_below() || *lo_it > dom.lower) return {};
  const double needed = dom.lower - *lo_it + kShiftMargin;
  // Round up to one decimal; the small slack absorbs representation error.
  const double shift = std::ceil(needed * 10.0 - 1e-9) / 10.0;
  std::ostringstream msg;
  msg << family.name() << " requires scores > " << dom.lower << " but the minimum score is " << *lo_it
      << "; add a score shift of " << shift;
  return {DomainCheck::Status::shift_required, shift, msg.str()};
}

DomainCheck validate_structure(const AdjustmentFamily& family, ScoreKind score) {
  if (family.v_domain().bounded_below() && !score_is_nonnegative(score)) {
    return {DomainCheck::Status::structural, 0.0,
            family.name() + " needs scores bounded below but " + to_string(score) +
                " is unbounded below; quantile estimates may leave the parameter domain"};
  }
  return {};
}

}  // namespace rcp
