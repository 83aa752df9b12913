#include "celllab/cellmodel.hpp"

#include <algorithm>
#include <cmath>

#include "celllab/errors.hpp"

namespace celllab::cell {

// ---------------------------------------------------------------------------
// OCV

OcvTable::OcvTable(std::vector<double> soc, std::vector<double> volts)
    : soc_(std::move(soc)), volts_(std::move(volts)) {
  if (soc_.size() < 2 || soc_.size() != volts_.size())
    throw InvalidCellParameters("OCV table needs >= 2 matching knots");
  if (soc_.front() != 0.0 || soc_.back() != 1.0)
    throw InvalidCellParameters("OCV table must span SOC 0..1");
  for (std::size_t i = 1; i < soc_.size(); ++i) {
    if (!(soc_[i] > soc_[i - 1])) throw InvalidCellParameters("OCV SOC knots must increase");
    if (!(volts_[i] > volts_[i - 1])) throw InvalidCellParameters("OCV must be strictly increasing");
  }
}

OcvTable OcvTable::default_table() {
  return OcvTable({0.0, 0.25, 0.5, 0.75, 1.0}, {3.0, 3.6, 3.8, 4.0, 4.3});
}

double OcvTable::operator()(double soc) const {
  if (!(soc >= 0.0 && soc <= 1.0)) throw OutOfRange("SOC outside [0, 1]");
  auto it = std::upper_bound(soc_.begin(), soc_.end(), soc);
  if (it == soc_.end()) return volts_.back();
  const auto i = static_cast<std::size_t>(it - soc_.begin());
  const double w = (soc - soc_[i - 1]) / (soc_[i] - soc_[i - 1]);
  return volts_[i - 1] + w * (volts_[i] - volts_[i - 1]);
}

double OcvTable::inverse(double volts) const {
  if (volts <= volts_.front()) return 0.0;
  if (volts >= volts_.back()) return 1.0;
  auto it = std::upper_bound(volts_.begin(), volts_.end(), volts);
  const auto i = static_cast<std::size_t>(it - volts_.begin());
  const double w = (volts - volts_[i - 1]) / (volts_[i] - volts_[i - 1]);
  return soc_[i - 1] + w * (soc_[i] - soc_[i - 1]);
}

// ---------------------------------------------------------------------------
// Protocol

std::string to_string(StepKind kind) {
  switch (kind) {
    case StepKind::cc_charge: return "cc_charge";
    case StepKind::cv_hold: return "cv_hold";
    case StepKind::cc_discharge: return "cc_discharge";
    case StepKind::rest: return "rest";
    case StepKind::eis_trigger: return "eis_trigger";
  }
  return "unknown";
}

ProtocolStep ProtocolStep::cc_charge(double c_rate, double v_limit) {
  return {.kind = StepKind::cc_charge, .c_rate = c_rate, .v_limit = v_limit};
}
ProtocolStep ProtocolStep::cv_hold(double v_limit, double c_rate, double cutoff_c_rate) {
  return {.kind = StepKind::cv_hold, .c_rate = c_rate, .v_limit = v_limit, .cutoff_c_rate = cutoff_c_rate};
}
ProtocolStep ProtocolStep::cc_discharge(double c_rate, double v_limit) {
  return {.kind = StepKind::cc_discharge, .c_rate = c_rate, .v_limit = v_limit};
}
ProtocolStep ProtocolStep::rest(double duration_s) {
  return {.kind = StepKind::rest, .duration_s = duration_s};
}
ProtocolStep ProtocolStep::eis_trigger() { return {.kind = StepKind::eis_trigger}; }

void Protocol::validate() const {
  if (steps.empty()) throw InvalidProtocol("protocol has no steps");
  for (const auto& s : steps) {
    if (s.repeat < 1) throw InvalidProtocol("step repeat must be >= 1");
    switch (s.kind) {
      case StepKind::cc_charge:
      case StepKind::cc_discharge:
        if (!(s.c_rate > 0.0)) throw InvalidProtocol("CC step needs c_rate > 0");
        if (!(s.v_limit > 0.0)) throw InvalidProtocol("CC step needs a voltage limit");
        break;
      case StepKind::cv_hold:
        if (!(s.c_rate > 0.0)) throw InvalidProtocol("CV step needs c_rate > 0");
        if (!(s.cutoff_c_rate > 0.0)) throw InvalidProtocol("CV step needs cutoff_c_rate > 0");
        if (!(s.v_limit > 0.0)) throw InvalidProtocol("CV step needs a voltage limit");
        break;
      case StepKind::rest:
        if (s.duration_s < 0.0) throw InvalidProtocol("rest duration must be >= 0");
        break;
      case StepKind::eis_trigger: break;
    }
  }
  const auto [lo, hi] = voltage_window();
  if (!(lo < hi)) throw InvalidProtocol("voltage window must satisfy v_min < v_max");
}

std::pair<double, double> Protocol::voltage_window() const {
  double lo = 0.0, hi = 0.0;
  bool have_lo = false, have_hi = false;
  for (const auto& s : steps) {
    if (s.kind == StepKind::cc_discharge) {
      lo = have_lo ? std::min(lo, s.v_limit) : s.v_limit;
      have_lo = true;
    } else if (s.kind == StepKind::cc_charge || s.kind == StepKind::cv_hold) {
      hi = have_hi ? std::max(hi, s.v_limit) : s.v_limit;
      have_hi = true;
    }
  }
  if (!have_lo) lo = hi - 1.0;  // charge-only protocols have an open lower side
  if (!have_hi) hi = lo + 1.0;
  return {lo, hi};
}

int Protocol::eis_trigger_count() const {
  int n = 0;
  for (const auto& s : steps)
    if (s.kind == StepKind::eis_trigger) n += s.repeat;
  return n;
}

namespace {

void append_formation(Protocol& p, int cycles) {
  for (int i = 0; i < cycles; ++i) {
    p.steps.push_back(ProtocolStep::cc_charge(0.1, 4.3));
    p.steps.push_back(ProtocolStep::cv_hold(4.3, 0.1));
    p.steps.push_back(ProtocolStep::cc_discharge(0.1, 3.0));
  }
}

void append_cc_cycles(Protocol& p, double c_rate, int cycles) {
  for (int i = 0; i < cycles; ++i) {
    p.steps.push_back(ProtocolStep::cc_charge(c_rate, 4.2));
    p.steps.push_back(ProtocolStep::cc_discharge(c_rate, 3.0));
  }
}

}  // namespace

Protocol reproducibility_protocol(int formation_cycles, int main_cycles) {
  Protocol p;
  p.name = "reproducibility";
  append_formation(p, formation_cycles);
  append_cc_cycles(p, 1.0, main_cycles);
  return p;
}

Protocol eis_rate_protocol(double rest_s, int formation_cycles, int cycles_per_rate) {
  Protocol p;
  p.name = "eis-rate";
  append_formation(p, formation_cycles);
  for (double rate : {0.5, 1.0, 2.0, 3.0}) {
    append_cc_cycles(p, rate, cycles_per_rate);
    p.steps.push_back(ProtocolStep::rest(rest_s));
    p.steps.push_back(ProtocolStep::eis_trigger());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Parameters

void CellParameters::validate() const {
  if (!(q_nominal_mah > 0.0)) throw InvalidCellParameters("q_nominal must be > 0");
  if (!(r_internal_ohm >= 0.0)) throw InvalidCellParameters("r_internal must be >= 0");
  if (!(fade_per_cycle >= 0.0 && fade_per_cycle < 1.0))
    throw InvalidCellParameters("fade_per_cycle must lie in [0, 1)");
  if (!(rate_exponent >= 0.0)) throw InvalidCellParameters("rate_exponent must be >= 0");
  if (!(eis_drift > -1.0)) throw InvalidCellParameters("eis_drift must be > -1");
  circuit.validate();
}

double CellParameters::effective_capacity_mah(double c_rate, int completed_cycles) const {
  return q_nominal_mah * std::pow(1.0 - fade_per_cycle, completed_cycles) *
         std::pow(c_rate, -rate_exponent);
}

eis::CircuitParams CellParameters::drifted_circuit(int completed_cycles) const {
  const double factor = std::pow(1.0 + eis_drift, completed_cycles);
  eis::CircuitParams c = circuit;
  c.r1 *= factor;
  for (auto& a : c.arcs) a.r *= factor;
  return c;
}

std::vector<CellParameters> sample_population(const CellParameters& base, const PopulationNoise& noise,
                                              int n, Rng& rng) {
  if (n < 1) throw InvalidCellParameters("population size must be >= 1");
  if (noise.capacity_rsd < 0.0 || noise.resistance_sigma_ohm < 0.0)
    throw InvalidCellParameters("noise standard deviations must be >= 0");
  auto clamp_positive = [](double x, double base_value) { return std::max(x, 1e-3 * base_value); };

  std::vector<CellParameters> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    CellParameters p = base;
    p.q_nominal_mah = clamp_positive(
        rng.normal(base.q_nominal_mah, noise.capacity_rsd * base.q_nominal_mah), base.q_nominal_mah);
    p.circuit.r1 = clamp_positive(rng.normal(base.circuit.r1, noise.resistance_sigma_ohm), base.circuit.r1);
    for (std::size_t k = 0; k < 3; ++k) {
      const double r0 = base.circuit.arcs[k].r;
      p.circuit.arcs[k].r = clamp_positive(rng.normal(r0, noise.resistance_sigma_ohm), r0);
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stepping

namespace {

struct SampleSink {
  const SimSettings& settings;
  std::vector<Sample>& out;
  double next_at;

  void offer(double t, double v, double i_a, double soc, bool force = false) {
    if (!settings.record_samples) return;
    if (force || t + 1e-9 >= next_at) {
      out.push_back({t, v, i_a, soc});
      next_at = t + settings.sample_every_s;
    }
  }
};

void check_duration(double elapsed, const SimSettings& settings) {
  if (elapsed > settings.max_step_s)
    throw NonconvergentStep("step did not reach its limit within the maximum duration");
}

StepOutcome simulate_cc(const CellParameters& params, const CellState& state, const ProtocolStep& step,
                        const SimSettings& settings) {
  StepOutcome out;
  out.state = state;
  const bool charging = step.kind == StepKind::cc_charge;
  const double sign = charging ? 1.0 : -1.0;
  const double i_ma = step.c_rate * params.q_nominal_mah;
  const double i_a = i_ma / 1000.0;
  const double drop = i_a * params.r_internal_ohm;
  const double q_scale = params.effective_capacity_mah(step.c_rate, state.completed_cycles);
  out.capacity_scale_mah = q_scale;

  // SOC at which ocv(soc) +/- I*R meets the limit.
  const double soc_limit = charging ? params.ocv.inverse(step.v_limit - drop)
                                    : params.ocv.inverse(step.v_limit + drop);
  const double distance = charging ? soc_limit - state.soc : state.soc - soc_limit;
  if (distance <= 0.0) {
    out.hit_limit = true;
    return out;
  }
  const double total_s = distance * 3600.0 * q_scale / i_ma;
  check_duration(total_s, settings);

  SampleSink sink{settings, out.samples, state.time_s};
  const double soc_rate = sign * i_ma / (3600.0 * q_scale);
  for (double t = 0.0; t < total_s; t += settings.dt_s) {
    const double soc = state.soc + soc_rate * t;
    sink.offer(state.time_s + t, params.ocv(soc) + sign * drop, sign * i_a, soc);
  }
  out.state.soc = soc_limit;
  out.state.time_s = state.time_s + total_s;
  sink.offer(out.state.time_s, params.ocv(soc_limit) + sign * drop, sign * i_a, soc_limit, true);

  out.elapsed_s = total_s;
  out.charge_mah = sign * i_ma * total_s / 3600.0;
  out.hit_limit = true;
  return out;
}

StepOutcome simulate_cv(const CellParameters& params, const CellState& state, const ProtocolStep& step,
                        const SimSettings& settings) {
  StepOutcome out;
  out.state = state;
  const double q_scale = params.effective_capacity_mah(step.c_rate, state.completed_cycles);
  out.capacity_scale_mah = q_scale;
  const double r = params.r_internal_ohm;
  const double cutoff_ma = step.cutoff_c_rate * params.q_nominal_mah;

  auto current_ma = [&](double soc) { return 1000.0 * (step.v_limit - params.ocv(soc)) / r; };

  if (r == 0.0) {
    // An ideal source settles instantly.
    out.hit_limit = true;
    return out;
  }
  double soc = state.soc;
  double i_now = current_ma(soc);
  const double sign = i_now >= 0.0 ? 1.0 : -1.0;
  if (std::abs(i_now) <= cutoff_ma) {
    out.hit_limit = true;
    return out;
  }

  SampleSink sink{settings, out.samples, state.time_s};
  const double k = 1.0 / (7200.0 * q_scale);  // trapezoid factor, SOC per (mA s)
  const double dt = settings.dt_s;
  double t = 0.0;
  double charge_mas = 0.0;  // mA s
  while (true) {
    sink.offer(state.time_s + t, step.v_limit, i_now / 1000.0, soc);
    // Implicit trapezoid: s - soc - dt*k*(i_now + I(s)) = 0, monotone in s.
    double lo = soc, hi = soc + 2.0 * dt * k * i_now;
    if (lo > hi) std::swap(lo, hi);
    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, 0.0, 1.0);
    auto g = [&](double s) { return sign * (s - soc - dt * k * (i_now + current_ma(s))); };
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((g(mid) < 0.0) == (sign > 0.0)) lo = mid;
      else hi = mid;
    }
    const double s_next = 0.5 * (lo + hi);
    const double i_next = current_ma(s_next);
    if (std::abs(i_next) <= cutoff_ma) {
      const double i_end = sign * cutoff_ma;
      const double s_end = params.ocv.inverse(step.v_limit - i_end * r / 1000.0);
      const double h = (s_end - soc) / (k * (i_now + i_end));
      charge_mas += 0.5 * (i_now + i_end) * h;
      t += h;
      soc = s_end;
      i_now = i_end;
      break;
    }
    charge_mas += 0.5 * (i_now + i_next) * dt;
    t += dt;
    soc = s_next;
    i_now = i_next;
    check_duration(t, settings);
  }
  check_duration(t, settings);
  sink.offer(state.time_s + t, step.v_limit, i_now / 1000.0, soc, true);

  out.state.soc = soc;
  out.state.time_s = state.time_s + t;
  out.elapsed_s = t;
  out.charge_mah = charge_mas / 3600.0;
  out.hit_limit = true;
  return out;
}

}  // namespace

StepOutcome simulate_step(const CellParameters& params, const CellState& state, const ProtocolStep& step,
                          const SimSettings& settings) {
  if (!(settings.dt_s > 0.0)) throw InvalidProtocol("dt must be > 0");
  if (!(state.soc >= 0.0 && state.soc <= 1.0)) throw OutOfRange("state SOC outside [0, 1]");

  switch (step.kind) {
    case StepKind::cc_charge:
    case StepKind::cc_discharge:
      return simulate_cc(params, state, step, settings);
    case StepKind::cv_hold:
      return simulate_cv(params, state, step, settings);
    case StepKind::rest: {
      StepOutcome out;
      out.state = state;
      out.state.time_s += step.duration_s;
      out.elapsed_s = step.duration_s;
      out.capacity_scale_mah = params.q_nominal_mah;
      SampleSink sink{settings, out.samples, state.time_s};
      const double v = params.ocv(state.soc);
      for (double t = 0.0; t < step.duration_s; t += settings.dt_s)
        sink.offer(state.time_s + t, v, 0.0, state.soc);
      sink.offer(out.state.time_s, v, 0.0, state.soc, true);
      return out;
    }
    case StepKind::eis_trigger: {
      StepOutcome out;
      out.state = state;
      out.capacity_scale_mah = params.q_nominal_mah;
      return out;
    }
  }
  throw InvalidProtocol("unknown step kind");
}

ProtocolRun run_protocol(const CellParameters& params, const Protocol& protocol,
                         const SimSettings& settings) {
  params.validate();
  protocol.validate();

  ProtocolRun run;
  CellState state;
  double cycle_charge = 0.0;
  double cycle_discharge = 0.0;
  double last_active_end = 0.0;

  for (const auto& step : protocol.steps) {
    for (int rep = 0; rep < step.repeat; ++rep) {
      if (step.kind == StepKind::eis_trigger) {
        EisTrigger trig;
        trig.index = static_cast<int>(run.triggers.size());
        trig.cycle = state.completed_cycles;
        trig.c_rate = run.record.rows.empty() ? 0.0 : run.record.rows.back().c_rate;
        trig.complete_s = last_active_end;
        trig.ready_s = state.time_s;
        trig.circuit = params.drifted_circuit(state.completed_cycles);
        run.triggers.push_back(trig);
        continue;
      }
      auto outcome = simulate_step(params, state, step, settings);
      state = outcome.state;
      if (settings.record_samples)
        run.record.trace.insert(run.record.trace.end(), outcome.samples.begin(), outcome.samples.end());
      if (outcome.charge_mah > 0.0) cycle_charge += outcome.charge_mah;
      else cycle_discharge -= outcome.charge_mah;
      if (step.kind != StepKind::rest) last_active_end = state.time_s;

      if (step.kind == StepKind::cc_discharge) {
        CycleRow row;
        row.cycle = state.completed_cycles + 1;
        row.c_rate = step.c_rate;
        row.charge_mah = cycle_charge;
        row.discharge_mah = cycle_discharge;
        row.ce = cycle_charge > 0.0 ? cycle_discharge / cycle_charge : 0.0;
        run.record.rows.push_back(row);
        ++state.completed_cycles;
        cycle_charge = 0.0;
        cycle_discharge = 0.0;
      }
    }
  }
  run.total_s = state.time_s;
  return run;
}

}  // namespace celllab::cell
