#pragma once

// Independent reference computations used to check the library.

#include <cmath>
#include <complex>
#include <vector>

#include "celllab/eis.hpp"

namespace celllab::testing {

/// Two-pass mean and sample standard deviation.
inline void two_pass(const std::vector<double>& x, double& mean, double& sd) {
  long double s = 0;
  for (double v : x) s += v;
  mean = static_cast<double>(s / x.size());
  long double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  sd = static_cast<double>(std::sqrt(ss / (x.size() - 1)));
}

/// r1 + sum r / (1 + j w r c), written out term by term.
inline std::complex<double> naive_impedance(const eis::CircuitParams& p, double f) {
  const double w = 2.0 * 3.14159265358979323846 * f;
  double re = p.r1, im = 0.0;
  for (const auto& a : p.arcs) {
    const double x = w * a.r * a.c;
    re += a.r / (1.0 + x * x);
    im -= a.r * x / (1.0 + x * x);
  }
  return {re, im};
}

/// Central differences of (re Z, im Z) in log-parameter space.
inline std::vector<std::vector<double>> fd_jacobian(const eis::CircuitParams& p, const std::vector<double>& grid,
                                                    double h = 1e-6) {
  const auto base = p.to_array();
  std::vector<std::vector<double>> J(2 * grid.size(), std::vector<double>(base.size()));
  for (std::size_t k = 0; k < base.size(); ++k) {
    auto up = base, dn = base;
    up[k] = base[k] * std::exp(h);
    dn[k] = base[k] * std::exp(-h);
    const auto pu = eis::CircuitParams::from_array(up), pd = eis::CircuitParams::from_array(dn);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const auto d = (naive_impedance(pu, grid[j]) - naive_impedance(pd, grid[j])) / (2.0 * h);
      J[2 * j][k] = d.real();
      J[2 * j + 1][k] = d.imag();
    }
  }
  return J;
}

}  // namespace celllab::testing
