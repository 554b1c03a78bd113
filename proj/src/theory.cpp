#include "rcp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "rcp/calibrate.hpp"
#include "rcp/datagen.hpp"

namespace rcp {

namespace {

void mean_sd(const std::vector<double>& v, double* mean, double* sd) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double a : v) ss += (a - m) * (a - m);
  *mean = m;
  *sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace

std::size_t calibration_size_for(std::size_t n_proper, double tau_fraction) {
  if (n_proper < 1) throw ArgumentError("calibration_size_for: n_proper must be >= 1");
  for (std::size_t n = n_proper + 1;; ++n) {
    const std::size_t t = tau_split_size(n, tau_fraction);
    if (n - t == n_proper && t >= 1) return n;
    if (n - t > n_proper) throw ArgumentError("calibration_size_for: no split yields the requested proper size");
  }
}

NetConfig reduced_quantile_net() {
  NetConfig c;
  c.hidden = {32, 32};
  c.batch_size = 16;
  c.max_epochs = 60;
  c.patience = 10;
  c.learning_rate = 1e-2;
  return c;
}

MarginalCheckResult check_marginal_bounds(const MarginalCheckSpec& spec, Rng& rng) {
  if (spec.reps < 2) throw ArgumentError("check_marginal_bounds: need at least 2 replications");
  if (spec.n_test < 1) throw ArgumentError("check_marginal_bounds: n_test must be >= 1");
  const bool oracle = spec.rectified && spec.estimator.kind == EstimatorKind::external;
  const std::size_t n_cal =
      spec.rectified && !oracle ? calibration_size_for(spec.n_proper, spec.tau_fraction) : spec.n_proper;
  const auto mean_pred = std::make_shared<ToyMeanPredictor>();
  const ScoreFunction score = ScoreFunction::abs_residual(mean_pred);
  const AdjustmentFamily family(spec.family);
  RcpOptions opt;
  opt.tau_fraction = spec.tau_fraction;
  opt.auto_shift = spec.auto_shift;

  MarginalCheckResult result;
  std::vector<double> coverage(spec.reps);
  for (std::size_t r = 0; r < spec.reps; ++r) {
    Rng rep = rng.fork(r);
    const LabeledDataset cal = sample_toy(n_cal, rep);
    const LabeledDataset test = sample_toy(spec.n_test, rep);
    std::size_t hits = 0;
    if (!spec.rectified) {
      const ScpModel model = scp_calibrate(cal, score, spec.alpha);
      for (Index i = 0; i < test.size(); ++i) hits += model.contains(test.x_row(i), test.y_row(i)) ? 1 : 0;
    } else {
      std::optional<RcpModel> model;
      if (oracle) {
        ContaminationSpec c{spec.omega, rep.next_u64()};
        RcpOptions raw = opt;
        raw.raw_space = true;
        model.emplace(rcp_calibrate_prefit(cal, score, family, std::make_shared<ToyQuantileEstimator>(spec.alpha, c),
                                           spec.alpha, raw));
      } else {
        model.emplace(rcp_calibrate(cal, score, family, spec.estimator, spec.alpha, opt, rep));
      }
      result.applied_shift = model->shift();
      for (Index i = 0; i < test.size(); ++i) hits += model->contains(test.x_row(i), test.y_row(i)) ? 1 : 0;
    }
    coverage[r] = static_cast<double>(hits) / static_cast<double>(spec.n_test);
  }
  double sd = 0.0;
  mean_sd(coverage, &result.mean, &sd);
  result.reps = spec.reps;
  result.calibration_rows = n_cal;
  result.stderr_mc = sd / std::sqrt(static_cast<double>(spec.reps));
  result.lower = 1.0 - spec.alpha - 3.0 * result.stderr_mc;
  result.upper = 1.0 - spec.alpha + 1.0 / static_cast<double>(spec.n_proper + 1) + 3.0 * result.stderr_mc;
  result.pass = result.mean >= result.lower && result.mean <= result.upper;
  return result;
}

double toy_local_coverage(double x, double base_level) {
  if (!(base_level > 0.0)) return 0.0;
  if (std::isinf(base_level)) return 1.0;
  return 2.0 * normal_cdf(base_level / toy_sd(x)) - 1.0;
}

std::vector<double> beta_equal_mass_grid(std::size_t n, double a, double b) {
  if (n < 1) throw ArgumentError("beta_equal_mass_grid: n must be >= 1");
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    grid[i] = boost::math::ibeta_inv(a, b, p);
  }
  return grid;
}

std::vector<Table1Row> check_table1(const Table1Spec& spec, Rng& rng) {
  if (spec.reps < 2 || spec.n < 1 || spec.grid < 1) throw ArgumentError("check_table1: invalid sizes");
  if (!(spec.lower_fraction > 0.0 && spec.lower_fraction <= 1.0)) {
    throw ArgumentError("check_table1: lower_fraction must lie in (0, 1]");
  }
  const std::vector<double> grid = beta_equal_mass_grid(spec.grid, kToyBetaA, kToyBetaB);
  const auto rank = static_cast<std::size_t>(
      std::max(1.0, std::ceil(spec.lower_fraction * static_cast<double>(spec.grid) - 1e-9)));

  std::vector<Table1Row> rows;
  for (std::size_t w = 0; w < spec.omegas.size(); ++w) {
    const double omega = spec.omegas[w];
    Rng stream = rng.fork(w);
    std::vector<double> lower(spec.reps);
    std::vector<double> rect(spec.n);
    std::vector<double> local(spec.grid);
    for (std::size_t r = 0; r < spec.reps; ++r) {
      Rng rep = stream.fork(r);
      const LabeledDataset cal = sample_toy(spec.n, rep);
      for (std::size_t i = 0; i < spec.n; ++i) {
        const double x = cal.x()(static_cast<Index>(i), 0);
        const double v = std::abs(cal.y()(static_cast<Index>(i), 0) - toy_mean(x));
        rect[i] = v - contaminated_tau(x, spec.alpha, omega, rep);
      }
      const double thr = empirical_quantile_conformal(rect, spec.alpha);
      for (std::size_t g = 0; g < spec.grid; ++g) {
        const double tau = contaminated_tau(grid[g], spec.alpha, omega, rep);
        local[g] = toy_local_coverage(grid[g], tau + thr);
      }
      std::nth_element(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(rank - 1), local.end());
      lower[r] = 100.0 * local[rank - 1];
    }
    Table1Row row;
    row.omega = omega;
    mean_sd(lower, &row.mean, &row.sd);
    row.stderr_mc = row.sd / std::sqrt(static_cast<double>(spec.reps));
    rows.push_back(row);
  }
  return rows;
}

double toy_pinball_risk(double x, double t, double alpha) {
  if (!(x > 0.0)) throw ArgumentError("toy_pinball_risk: x must be positive");
  const double beta = 1.0 - alpha;
  const double s = toy_sd(x);
  const double c = std::sqrt(2.0 / std::numbers::pi) / s;
  auto density = [s, c](double v) { return c * std::exp(-0.5 * (v / s) * (v / s)); };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  constexpr double kTol = 1e-13;
  double err_lo = 0.0;
  double err_hi = 0.0;
  double below = 0.0;
  const double start = std::max(t, 0.0);
  if (t > 0.0) {
    below = Quad::integrate([&](double v) { return (1.0 - beta) * (t - v) * density(v); }, 0.0, t, 20, kTol,
                            &err_lo);
  }
  const double above = Quad::integrate([&](double v) { return beta * (v - t) * density(v); }, start,
                                       std::numeric_limits<double>::infinity(), 20, kTol, &err_hi);
  const double total = below + above;
  if (!std::isfinite(total) || err_lo + err_hi > 1e-9 * (1.0 + std::abs(total))) {
    throw NumericError("toy_pinball_risk: quadrature did not converge");
  }
  return total;
}

std::vector<std::pair<double, double>> epsilon_sweep(double alpha) {
  std::vector<std::pair<double, double>> pairs;
  for (int i = 1; i <= 10; ++i) {
    const double x = 0.1 * i;
    const double star = oracle_toy_quantile(x, alpha);
    for (int j = 0; j < 10; ++j) pairs.emplace_back(x, star * (0.25 + 0.175 * j));
  }
  return pairs;
}

EpsilonCheck check_epsilon_bound(const std::vector<std::pair<double, double>>& pairs, double alpha, double tolerance) {
  EpsilonCheck out;
  for (const auto& [x, tau] : pairs) {
    EpsilonPoint p;
    p.x = x;
    p.tau = tau;
    const double star = oracle_toy_quantile(x, alpha);
    p.epsilon = toy_local_coverage(x, tau) - (1.0 - alpha);
    p.gap = std::max(0.0, toy_pinball_risk(x, tau, alpha) - toy_pinball_risk(x, star, alpha));
    p.bound = std::sqrt(2.0 * p.gap);
    p.lipschitz = std::sqrt(2.0 / std::numbers::pi) / toy_sd(x);
    p.scaled_bound = std::sqrt(2.0 * p.lipschitz * p.gap);
    const double excess = std::abs(p.epsilon) - p.bound;
    if (excess > tolerance) ++out.violations;
    if (std::abs(p.epsilon) - p.scaled_bound > tolerance) ++out.scaled_violations;
    out.max_violation = std::max(out.max_violation, excess);
    out.points.push_back(p);
  }
  return out;
}

}  // namespace rcp
