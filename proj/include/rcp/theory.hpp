#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "rcp/adjustments.hpp"
#include "rcp/quantile.hpp"

namespace rcp {

/// Monte-Carlo check of the marginal coverage sandwich
///   1 - alpha <= P(Y in C(X)) < 1 - alpha + 1/(n + 1)
/// on the toy law with the exact mean as base predictor and |y - mu(x)| as score.
struct MarginalCheckSpec {
  std::size_t n_proper = 99;
  double alpha = 0.1;
  std::size_t reps = 2000;
  std::size_t n_test = 1000;
  double tau_fraction = 0.5;
  bool rectified = true;
  AdjustmentKind family = AdjustmentKind::additive;
  /// kind == external uses the (contaminated) oracle quantile with `omega`.
  EstimatorSpec estimator;
  double omega = 0.0;
  bool auto_shift = true;
};

struct MarginalCheckResult {
  double mean = 0.0;
  double stderr_mc = 0.0;
  double lower = 0.0;  // 1 - alpha - 3 stderr
  double upper = 0.0;  // 1 - alpha + 1/(n+1) + 3 stderr
  bool pass = false;
  std::size_t reps = 0;
  std::size_t calibration_rows = 0;  // rows drawn per replication
  double applied_shift = 0.0;        // score shift of the last replication
};

/// Quantile network small enough for thousands of replications: [p, 32, 32, 1].
NetConfig reduced_quantile_net();

MarginalCheckResult check_marginal_bounds(const MarginalCheckSpec& spec, Rng& rng);

/// Smallest calibration size whose proper part has n_proper rows.
std::size_t calibration_size_for(std::size_t n_proper, double tau_fraction);

/// P(|Y - mu(x)| <= b | X = x) on the toy law.
double toy_local_coverage(double x, double base_level);

/// n equal-mass quantile points (i + 1/2)/n of Beta(a, b).
std::vector<double> beta_equal_mass_grid(std::size_t n, double a, double b);

/// Local coverage of the additive RCP set with a contaminated oracle tau_hat,
/// summarized by its lower tail over an x grid.
struct Table1Spec {
  std::vector<double> omegas = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  std::size_t reps = 1000;
  std::size_t n = 100;
  double alpha = 0.1;
  std::size_t grid = 200;
  double lower_fraction = 0.1;
};

struct Table1Row {
  double omega = 0.0;
  double mean = 0.0;  // percent
  double sd = 0.0;    // percent, across replications
  double stderr_mc = 0.0;
};

std::vector<Table1Row> check_table1(const Table1Spec& spec, Rng& rng);

/// Expected pinball loss L_x(t) = E[rho_{1-alpha}(|Y - mu(x)| - t) | X = x] by
/// adaptive Gauss-Kronrod quadrature. Throws NumericError if it does not converge.
double toy_pinball_risk(double x, double t, double alpha);

struct EpsilonPoint {
  double x = 0.0;
  double tau = 0.0;
  double epsilon = 0.0;    // F(tau) - (1 - alpha)
  double gap = 0.0;        // L_x(tau) - L_x(tau*)
  double bound = 0.0;      // sqrt(2 gap)
  double lipschitz = 0.0;  // sup of the conditional score density
  double scaled_bound = 0.0;  // sqrt(2 lipschitz gap)
};

struct EpsilonCheck {
  std::vector<EpsilonPoint> points;
  std::size_t violations = 0;         // |eps| > sqrt(2 gap) + tol
  std::size_t scaled_violations = 0;  // |eps| > sqrt(2 L gap) + tol
  double max_violation = 0.0;
};

/// 100 (x, tau) pairs: x = 0.1, ..., 1.0 and tau = c * tau*(x) for ten
/// multiples c from 0.25 to 1.825, so both sides of the optimum are covered.
std::vector<std::pair<double, double>> epsilon_sweep(double alpha);

EpsilonCheck check_epsilon_bound(const std::vector<std::pair<double, double>>& pairs, double alpha,
                                 double tolerance = 1e-6);

}  // namespace rcp
