#pragma once

#include <array>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "celllab/rng.hpp"

namespace celllab::eis {

/// Parallel R-C arc. `alpha` < 1 turns the capacitor into a constant-phase
/// element; everything defaults to an ideal capacitor.
struct Arc {
  double r = 0.0;  // ohm
  double c = 0.0;  // farad
  double alpha = 1.0;

  double tau() const { return r * c; }
  double characteristic_hz() const;
};

/// Series R1 plus three parallel RC arcs (contact, SEI, charge transfer),
/// kept in order of descending characteristic frequency.
struct CircuitParams {
  double r1 = 0.0;
  std::array<Arc, 3> arcs{};

  void validate() const;
  /// Same circuit with arcs sorted by ascending time constant.
  CircuitParams canonical() const;
  double total_resistance() const;

  static constexpr int kParameterCount = 7;
  /// (r1, r2, c2, r3, c3, r4, c4)
  std::array<double, kParameterCount> to_array() const;
  static CircuitParams from_array(const std::array<double, kParameterCount>& v);

  /// Typical NCM811 || Li coin cell after formation.
  static CircuitParams defaults();
};

struct ImpedancePoint {
  double freq_hz = 0.0;
  double re_ohm = 0.0;
  double im_ohm = 0.0;

  std::complex<double> z() const { return {re_ohm, im_ohm}; }
};

struct SpectrumMeta {
  int cell_id = -1;
  int trigger = 0;
  int cycle = 0;
  double c_rate = 0.0;
};

struct Spectrum {
  std::vector<ImpedancePoint> points;
  SpectrumMeta meta;

  /// Frequencies strictly decreasing inside [0.1 Hz, 200 kHz], values finite.
  void validate() const;
};

inline constexpr double kMaxFrequencyHz = 2.0e5;
inline constexpr double kMinFrequencyHz = 0.1;

std::complex<double> impedance(const CircuitParams& params, double freq_hz);

/// Log-spaced sweep from f_max down to f_min, endpoints exact.
std::vector<double> frequency_grid(double points_per_decade = 10.0, double f_max = kMaxFrequencyHz,
                                   double f_min = kMinFrequencyHz);

/// Clean spectrum plus, per point, a complex perturbation of magnitude
/// noise_rel * |Z| at a uniformly random phase.
Spectrum synthesize_spectrum(const CircuitParams& params, std::span<const double> grid,
                             double noise_rel, Rng& rng);

CircuitParams initial_guess(const Spectrum& spectrum);

/// d(re Z, im Z)/d(log p) for p = (r1, r2, c2, r3, c3, r4, c4).
/// Row 2j is the real part at grid[j], row 2j+1 the imaginary part.
Eigen::MatrixXd jacobian(const CircuitParams& params, std::span<const double> grid);

struct FitOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-8;
  double gradient_tolerance = 1e-10;
  /// Time constants closer than this ratio mark the fit ill-conditioned.
  double identifiability_ratio = 2.0;
};

struct FitResult {
  CircuitParams params;
  /// sqrt(sum |Z_meas - Z_model|^2), in ohm.
  double residual_norm = 0.0;
  /// Half the modulus-weighted sum of squares that was minimised.
  double weighted_cost = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool ill_conditioned = false;
  /// Standard errors in the same order as CircuitParams::to_array().
  std::array<double, CircuitParams::kParameterCount> std_errors{};
};

/// Complex nonlinear least squares with modulus weighting 1/|Z_meas|^2,
/// solved by Levenberg-Marquardt over log-parameters.
///
/// Returns the best point found with converged = false when the iteration
/// budget runs out. Throws DegenerateSpectrum if every point is the same.
FitResult fit(const Spectrum& spectrum, std::optional<CircuitParams> init = std::nullopt,
              const FitOptions& options = {});

}  // namespace celllab::eis
