#include "celllab/eis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "celllab/errors.hpp"

namespace celllab::eis {
namespace {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// (i * omega * tau)^alpha without going through complex pow for alpha == 1.
cd iwt_pow(double omega_tau, double alpha) {
  if (alpha == 1.0) return {0.0, omega_tau};
  const double mag = std::pow(omega_tau, alpha);
  const double phase = alpha * std::numbers::pi / 2.0;
  return {mag * std::cos(phase), mag * std::sin(phase)};
}

std::vector<ImpedancePoint> sorted_points(const Spectrum& spectrum) {
  auto pts = spectrum.points;
  std::stable_sort(pts.begin(), pts.end(),
                   [](const ImpedancePoint& a, const ImpedancePoint& b) { return a.freq_hz > b.freq_hz; });
  return pts;
}

using Params = std::array<double, CircuitParams::kParameterCount>;

}  // namespace

double Arc::characteristic_hz() const { return 1.0 / (kTwoPi * r * c); }

void CircuitParams::validate() const {
  if (!(r1 > 0.0) || !std::isfinite(r1)) throw InvalidSpectrum("circuit r1 must be > 0");
  for (const auto& a : arcs) {
    if (!(a.r > 0.0) || !(a.c > 0.0) || !std::isfinite(a.r) || !std::isfinite(a.c))
      throw InvalidSpectrum("circuit arc r and c must be > 0");
    if (!(a.alpha > 0.0 && a.alpha <= 1.0)) throw InvalidSpectrum("arc alpha must lie in (0, 1]");
  }
}

CircuitParams CircuitParams::canonical() const {
  CircuitParams out = *this;
  std::stable_sort(out.arcs.begin(), out.arcs.end(),
                   [](const Arc& a, const Arc& b) { return a.tau() < b.tau(); });
  return out;
}

double CircuitParams::total_resistance() const {
  double sum = r1;
  for (const auto& a : arcs) sum += a.r;
  return sum;
}

Params CircuitParams::to_array() const {
  return {r1, arcs[0].r, arcs[0].c, arcs[1].r, arcs[1].c, arcs[2].r, arcs[2].c};
}

CircuitParams CircuitParams::from_array(const Params& v) {
  CircuitParams p;
  p.r1 = v[0];
  for (std::size_t k = 0; k < 3; ++k) {
    p.arcs[k].r = v[1 + 2 * k];
    p.arcs[k].c = v[2 + 2 * k];
  }
  return p;
}

CircuitParams CircuitParams::defaults() {
  CircuitParams p;
  p.r1 = 6.0;
  p.arcs = {Arc{8.0, 2.0e-6}, Arc{20.0, 5.0e-5}, Arc{40.0, 2.5e-3}};
  return p;
}

void Spectrum::validate() const {
  if (points.empty()) throw InvalidSpectrum("spectrum has no points");
  constexpr double kSlack = 1e-9;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const auto& p = points[j];
    if (!std::isfinite(p.freq_hz) || !std::isfinite(p.re_ohm) || !std::isfinite(p.im_ohm))
      throw InvalidSpectrum("spectrum contains non-finite values");
    if (p.freq_hz > kMaxFrequencyHz * (1 + kSlack) || p.freq_hz < kMinFrequencyHz * (1 - kSlack))
      throw InvalidSpectrum("frequency outside 0.1 Hz - 200 kHz");
    if (j > 0 && !(p.freq_hz < points[j - 1].freq_hz))
      throw InvalidSpectrum("frequencies must be strictly decreasing");
  }
}

std::complex<double> impedance(const CircuitParams& params, double freq_hz) {
  if (!(freq_hz > 0.0)) throw NonPositiveFrequency("frequency must be > 0");
  const double omega = kTwoPi * freq_hz;
  cd z = params.r1;
  for (const auto& a : params.arcs) z += a.r / (1.0 + iwt_pow(omega * a.tau(), a.alpha));
  return z;
}

std::vector<double> frequency_grid(double points_per_decade, double f_max, double f_min) {
  if (!(f_max > f_min) || !(f_min > 0.0) || !(points_per_decade > 0.0))
    throw InvalidSpectrum("invalid frequency grid bounds");
  const double decades = std::log10(f_max / f_min);
  const auto n = static_cast<std::size_t>(std::lround(decades * points_per_decade)) + 1;
  std::vector<double> grid(n);
  const double hi = std::log10(f_max);
  const double step = decades / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < n; ++j) grid[j] = std::pow(10.0, hi - step * static_cast<double>(j));
  grid.front() = f_max;
  grid.back() = f_min;
  return grid;
}

Spectrum synthesize_spectrum(const CircuitParams& params, std::span<const double> grid, double noise_rel,
                             Rng& rng) {
  if (noise_rel < 0.0) throw InvalidSpectrum("noise_rel must be >= 0");
  Spectrum s;
  s.points.reserve(grid.size());
  for (double f : grid) {
    if (f > kMaxFrequencyHz * (1 + 1e-9) || f < kMinFrequencyHz * (1 - 1e-9))
      throw InvalidSpectrum("grid outside 0.1 Hz - 200 kHz");
    cd z = impedance(params, f);
    if (noise_rel > 0.0) {
      const double phase = rng.uniform(0.0, kTwoPi);
      z += std::polar(noise_rel * std::abs(z), phase);
    }
    s.points.push_back({f, z.real(), z.imag()});
  }
  return s;
}

CircuitParams initial_guess(const Spectrum& spectrum) {
  const auto pts = sorted_points(spectrum);
  if (pts.size() < 10) throw InsufficientData("initial guess needs at least 10 points");
  const double f_hi = pts.front().freq_hz;
  const double f_lo = pts.back().freq_hz;
  if (!(f_lo > 0.0) || std::log10(f_hi / f_lo) < 3.0)
    throw InsufficientData("initial guess needs a sweep spanning at least 3 decades");

  const double r1_raw = pts.front().re_ohm;
  const double scale = std::max({std::abs(r1_raw), std::abs(pts.back().re_ohm), 1e-9});
  const double r1 = std::max(r1_raw, 1e-6 * scale);
  const double arc_total = std::max(pts.back().re_ohm - r1, 1e-9 * scale);

  // Arcs start at the centres of three equal log-frequency bands.
  const double log_hi = std::log10(f_hi);
  const double span = log_hi - std::log10(f_lo);
  CircuitParams p;
  p.r1 = r1;
  for (std::size_t k = 0; k < 3; ++k) {
    const double f_k = std::pow(10.0, log_hi - span * (2.0 * static_cast<double>(k) + 1.0) / 6.0);
    const double r_k = arc_total / 3.0;
    p.arcs[k] = Arc{r_k, 1.0 / (kTwoPi * f_k * r_k)};
  }
  return p;
}

Eigen::MatrixXd jacobian(const CircuitParams& params, std::span<const double> grid) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, CircuitParams::kParameterCount);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double f = grid[static_cast<std::size_t>(j)];
    if (!(f > 0.0)) throw NonPositiveFrequency("frequency must be > 0");
    const double omega = kTwoPi * f;
    J(2 * j, 0) = params.r1;
    for (Eigen::Index k = 0; k < 3; ++k) {
      const Arc& a = params.arcs[static_cast<std::size_t>(k)];
      const cd u = iwt_pow(omega * a.tau(), a.alpha);
      const cd denom = 1.0 + u;
      const cd z_arc = a.r / denom;
      const cd common = -a.r * a.alpha * u / (denom * denom);  // dZ/dlog(tau)
      const cd d_log_r = z_arc + common;
      const cd d_log_c = common;
      J(2 * j, 1 + 2 * k) = d_log_r.real();
      J(2 * j + 1, 1 + 2 * k) = d_log_r.imag();
      J(2 * j, 2 + 2 * k) = d_log_c.real();
      J(2 * j + 1, 2 + 2 * k) = d_log_c.imag();
    }
  }
  return J;
}

FitResult fit(const Spectrum& spectrum, std::optional<CircuitParams> init, const FitOptions& options) {
  const auto pts = sorted_points(spectrum);
  constexpr int kP = CircuitParams::kParameterCount;
  if (pts.size() * 2 < static_cast<std::size_t>(kP))
    throw InsufficientData("fit needs at least 4 points");

  bool all_same = true;
  for (const auto& p : pts)
    if (p.re_ohm != pts.front().re_ohm || p.im_ohm != pts.front().im_ohm) all_same = false;
  if (all_same) throw DegenerateSpectrum("every spectrum point is identical");

  std::vector<double> grid;
  std::vector<cd> measured;
  Eigen::VectorXd weight(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t j = 0; j < pts.size(); ++j) {
    grid.push_back(pts[j].freq_hz);
    measured.push_back(pts[j].z());
    const double mod = std::abs(pts[j].z());
    if (!(mod > 0.0)) throw DegenerateSpectrum("zero impedance point");
    weight(static_cast<Eigen::Index>(j)) = 1.0 / mod;
  }
  const auto m = static_cast<Eigen::Index>(2 * pts.size());

  const CircuitParams start = (init ? *init : initial_guess(spectrum)).canonical();
  // CPE exponents stay fixed at their initial values.
  std::array<double, 3> alphas{start.arcs[0].alpha, start.arcs[1].alpha, start.arcs[2].alpha};

  auto to_params = [&](const Eigen::VectorXd& theta) {
    Params v;
    for (int i = 0; i < kP; ++i) v[static_cast<std::size_t>(i)] = std::exp(theta(i));
    auto p = CircuitParams::from_array(v);
    for (std::size_t k = 0; k < 3; ++k) p.arcs[k].alpha = alphas[k];
    return p;
  };
  auto residuals = [&](const CircuitParams& p) {
    Eigen::VectorXd r(m);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const cd d = impedance(p, grid[j]) - measured[j];
      const auto jj = static_cast<Eigen::Index>(j);
      r(2 * jj) = d.real() * weight(jj);
      r(2 * jj + 1) = d.imag() * weight(jj);
    }
    return r;
  };
  auto weighted_jacobian = [&](const CircuitParams& p) {
    Eigen::MatrixXd J = jacobian(p, grid);
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(grid.size()); ++j) {
      J.row(2 * j) *= weight(j);
      J.row(2 * j + 1) *= weight(j);
    }
    return J;
  };

  Eigen::VectorXd theta(kP);
  {
    const auto v = start.to_array();
    for (int i = 0; i < kP; ++i) theta(i) = std::log(v[static_cast<std::size_t>(i)]);
  }
  CircuitParams params = to_params(theta);
  Eigen::VectorXd r = residuals(params);
  double cost = 0.5 * r.squaredNorm();
  Eigen::MatrixXd J = weighted_jacobian(params);

  double lambda = 1e-3;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;

  while (iterations < options.max_iterations) {
    const Eigen::VectorXd g = J.transpose() * r;
    grad_norm = g.lpNorm<Eigen::Infinity>();
    if (grad_norm < options.gradient_tolerance) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd A = J.transpose() * J;
    const double diag_floor = 1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    bool stalled = false;
    while (iterations < options.max_iterations) {
      ++iterations;
      Eigen::MatrixXd damped = A;
      for (int i = 0; i < kP; ++i) damped(i, i) += lambda * std::max(A(i, i), diag_floor);
      const Eigen::VectorXd delta = damped.ldlt().solve(-g);
      const double step = delta.lpNorm<Eigen::Infinity>();
      if (!std::isfinite(step)) {
        lambda *= 10.0;
        continue;
      }
      Eigen::VectorXd trial = theta + delta;
      trial = trial.cwiseMax(-60.0).cwiseMin(60.0);
      const CircuitParams trial_params = to_params(trial);
      const Eigen::VectorXd trial_r = residuals(trial_params);
      const double trial_cost = 0.5 * trial_r.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        theta = trial;
        params = trial_params;
        r = trial_r;
        cost = trial_cost;
        J = weighted_jacobian(params);
        lambda = std::max(lambda / 3.0, 1e-15);
        accepted = true;
        if (step < options.step_tolerance) converged = true;
        break;
      }
      if (step < options.step_tolerance) {
        // No representable improvement left: stationary point.
        converged = true;
        stalled = true;
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e16) {
        stalled = true;
        break;
      }
    }
    if (converged || stalled || !accepted) break;
  }
  grad_norm = (J.transpose() * r).lpNorm<Eigen::Infinity>();
  if (grad_norm < options.gradient_tolerance) converged = true;

  FitResult out;
  out.iterations = iterations;
  out.converged = converged;
  out.weighted_cost = cost;
  out.gradient_norm = grad_norm;

  double ss = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) ss += std::norm(impedance(params, grid[j]) - measured[j]);
  out.residual_norm = std::sqrt(ss);

  // Covariance in log space, mapped back with d p = p d(log p).
  const Eigen::MatrixXd A = J.transpose() * J;
  const double dof = std::max<double>(static_cast<double>(m - kP), 1.0);
  const double s2 = 2.0 * cost / dof;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  const auto v = params.to_array();
  if (lu.isInvertible()) {
    const Eigen::MatrixXd cov = lu.inverse() * s2;
    for (int i = 0; i < kP; ++i)
      out.std_errors[static_cast<std::size_t>(i)] =
          v[static_cast<std::size_t>(i)] * std::sqrt(std::max(cov(i, i), 0.0));
  } else {
    out.std_errors.fill(std::numeric_limits<double>::infinity());
  }

  // Arc order is arbitrary inside the optimiser; report it canonically.
  // Standard errors travel with their arcs.
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return params.arcs[a].tau() < params.arcs[b].tau();
  });
  const auto se = out.std_errors;
  CircuitParams sorted = params;
  for (std::size_t k = 0; k < 3; ++k) {
    sorted.arcs[k] = params.arcs[order[k]];
    out.std_errors[1 + 2 * k] = se[1 + 2 * order[k]];
    out.std_errors[2 + 2 * k] = se[2 + 2 * order[k]];
  }
  out.params = sorted;
  for (std::size_t k = 0; k + 1 < 3; ++k) {
    if (sorted.arcs[k + 1].tau() < options.identifiability_ratio * sorted.arcs[k].tau())
      out.ill_conditioned = true;
  }
  return out;
}

}  // namespace celllab::eis
