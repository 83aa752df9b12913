#pragma once

#include <string>
#include <utility>
#include <vector>

#include "celllab/eis.hpp"
#include "celllab/rng.hpp"

namespace celllab::cell {

/// Monotone open-circuit voltage curve, piecewise linear in SOC.
class OcvTable {
 public:
  OcvTable(std::vector<double> soc, std::vector<double> volts);

  /// Five knots from 3.0 V (empty) to 4.3 V (full).
  static OcvTable default_table();

  /// Throws OutOfRange outside [0, 1].
  double operator()(double soc) const;
  /// SOC at which the curve reaches `volts`, clamped to [0, 1].
  double inverse(double volts) const;

  double v_min() const { return volts_.front(); }
  double v_max() const { return volts_.back(); }
  const std::vector<double>& soc() const noexcept { return soc_; }
  const std::vector<double>& volts() const noexcept { return volts_; }

 private:
  std::vector<double> soc_;
  std::vector<double> volts_;
};

enum class StepKind { cc_charge, cv_hold, cc_discharge, rest, eis_trigger };

std::string to_string(StepKind kind);

struct ProtocolStep {
  StepKind kind = StepKind::rest;
  double c_rate = 0.0;         // cc steps; for cv the rate whose capacity scale applies
  double v_limit = 0.0;        // V
  double duration_s = 0.0;     // rest
  double cutoff_c_rate = 0.0;  // cv termination current
  int repeat = 1;              // consecutive executions of this step

  static ProtocolStep cc_charge(double c_rate, double v_limit);
  static ProtocolStep cv_hold(double v_limit, double c_rate, double cutoff_c_rate = 0.05);
  static ProtocolStep cc_discharge(double c_rate, double v_limit);
  static ProtocolStep rest(double duration_s);
  static ProtocolStep eis_trigger();
};

struct Protocol {
  std::string name;
  std::vector<ProtocolStep> steps;

  /// Throws InvalidProtocol.
  void validate() const;
  /// Lowest and highest voltage limit used by any step.
  std::pair<double, double> voltage_window() const;
  int eis_trigger_count() const;
};

/// 0.1C CCCV / CC formation in 3.0-4.3 V, then 1C CC / CC cycling in 3.0-4.2 V.
Protocol reproducibility_protocol(int formation_cycles = 2, int main_cycles = 50);
/// Formation as above, then two CC / CC cycles at each of 0.5, 1, 2 and 3C,
/// each block followed by a rest and an EIS trigger.
Protocol eis_rate_protocol(double rest_s = 1800.0, int formation_cycles = 2, int cycles_per_rate = 2);

struct CellParameters {
  double q_nominal_mah = 3.5;
  double r_internal_ohm = 10.0;
  double fade_per_cycle = 5e-4;
  double rate_exponent = 0.05;
  OcvTable ocv = OcvTable::default_table();
  eis::CircuitParams circuit = eis::CircuitParams::defaults();
  /// Fractional growth of circuit resistances per completed cycle.
  double eis_drift = 0.002;

  void validate() const;
  /// Capacity available at `c_rate` after `completed_cycles` cycles.
  double effective_capacity_mah(double c_rate, int completed_cycles) const;
  /// Circuit after `completed_cycles` cycles of resistance drift.
  eis::CircuitParams drifted_circuit(int completed_cycles) const;
};

struct PopulationNoise {
  double capacity_rsd = 0.0104;
  double resistance_sigma_ohm = 2.5;
};

/// Cell-to-cell spread: q_nominal ~ N(q, rsd*q), each circuit resistance
/// ~ N(r, sigma); draws are clamped to stay positive.
std::vector<CellParameters> sample_population(const CellParameters& base, const PopulationNoise& noise,
                                              int n, Rng& rng);

struct CellState {
  double soc = 0.0;
  double time_s = 0.0;
  int completed_cycles = 0;
};

struct Sample {
  double time_s;
  double voltage;
  double current_a;  // positive while charging
  double soc;
};

struct SimSettings {
  double dt_s = 1.0;
  double max_step_s = 24.0 * 3600.0;
  bool record_samples = false;
  double sample_every_s = 60.0;
};

struct StepOutcome {
  CellState state;
  std::vector<Sample> samples;
  double elapsed_s = 0.0;
  /// Trapezoidal integral of current over the step, mAh (signed).
  double charge_mah = 0.0;
  /// Capacity that one unit of SOC represented during the step.
  double capacity_scale_mah = 0.0;
  bool hit_limit = false;
};

/// Advances one protocol step.
///
/// CC holds the current and stops where the terminal voltage
/// ocv(soc) +/- I*R meets the limit. CV holds the limit, the current follows
/// from ocv(soc) + I*R = v_limit, and the step stops at the cutoff current.
/// SOC advances by the trapezoidal current integral over fixed dt; the final
/// partial step is placed exactly on the limit by inverting the OCV curve.
/// Throws NonconvergentStep past settings.max_step_s.
StepOutcome simulate_step(const CellParameters& params, const CellState& state, const ProtocolStep& step,
                          const SimSettings& settings = {});

struct CycleRow {
  int cycle = 0;
  double c_rate = 0.0;
  double charge_mah = 0.0;
  double discharge_mah = 0.0;
  double ce = 0.0;
};

struct CyclingRecord {
  std::vector<CycleRow> rows;
  std::vector<Sample> trace;
};

struct EisTrigger {
  int index = 0;
  int cycle = 0;          // completed cycles at trigger time
  double c_rate = 0.0;    // rate of the block just finished
  double complete_s = 0;  // end of the last cycling step before the rest
  double ready_s = 0;     // after the rest
  eis::CircuitParams circuit;
};

struct ProtocolRun {
  CyclingRecord record;
  std::vector<EisTrigger> triggers;
  double total_s = 0.0;
};

/// Runs a whole protocol from an empty cell. A cycle row closes at the end
/// of every cc_discharge; fade and EIS drift follow the completed-cycle count.
ProtocolRun run_protocol(const CellParameters& params, const Protocol& protocol,
                         const SimSettings& settings = {});

}  // namespace celllab::cell
