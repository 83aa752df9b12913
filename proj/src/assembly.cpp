#include "celllab/assembly.hpp"

#include <cmath>

#include "celllab/errors.hpp"

namespace celllab::assembly {

std::string_view to_string(Component c) {
  switch (c) {
    case Component::can: return "can";
    case Component::anode: return "anode";
    case Component::separator: return "separator";
    case Component::cathode: return "cathode";
    case Component::spring: return "spring";
    case Component::spacer: return "spacer";
    case Component::cap: return "cap";
  }
  return "unknown";
}

std::string_view to_string(Step s) {
  switch (s) {
    case Step::place_can: return "place_can";
    case Step::place_anode: return "place_anode";
    case Step::place_separator: return "place_separator";
    case Step::dispense_electrolyte: return "dispense_electrolyte";
    case Step::place_cathode: return "place_cathode";
    case Step::place_spring: return "place_spring";
    case Step::place_spacer: return "place_spacer";
    case Step::place_cap: return "place_cap";
    case Step::crimp: return "crimp";
    case Step::handoff_to_gantry: return "handoff_to_gantry";
  }
  return "unknown";
}

std::string_view resource_for(Step s) {
  switch (s) {
    case Step::place_spring: return "robot_arm:parallel_gripper";
    case Step::dispense_electrolyte: return "liquid_handler";
    case Step::crimp: return "crimper";
    case Step::handoff_to_gantry: return "robot_arm";
    default: return "robot_arm:vacuum_gripper";
  }
}

// ---------------------------------------------------------------------------

PlateInventory::PlateInventory()
    : pick_positions_{{
          {"can_station", 0.0, 0.0, 120.0},
          {"anode_station", 60.0, 0.0, 120.0},
          {"separator_station", 120.0, 0.0, 120.0},
          {"cathode_station", 180.0, 0.0, 120.0},
          {"spring_station", 240.0, 0.0, 120.0},
          {"spacer_station", 300.0, 0.0, 120.0},
          {"cap_station", 360.0, 0.0, 120.0},
          {"crimper_die", 200.0, 250.0, 80.0},
      }} {}

ComponentSet PlateInventory::next_component_set() {
  for (int i = 0; i < kCapacity; ++i) {
    if (!consumed_[static_cast<std::size_t>(i)]) {
      consumed_[static_cast<std::size_t>(i)] = true;
      ++consumed_count_;
      ComponentSet set;
      set.plate_index = i / kSlotsPerPlate;
      set.slot_index = i % kSlotsPerPlate;
      return set;
    }
  }
  throw InventoryDepleted("all 48 component sets have been used");
}

bool PlateInventory::is_consumed(int plate, int slot) const {
  if (plate < 0 || plate >= kPlates || slot < 0 || slot >= kSlotsPerPlate)
    throw std::out_of_range("plate/slot index");
  return consumed_[static_cast<std::size_t>(plate * kSlotsPerPlate + slot)];
}

ComponentSet next_component_set(PlateInventory& inventory) { return inventory.next_component_set(); }

// ---------------------------------------------------------------------------

double ResourceRegistry::acquire(const std::string& resource, int holder, double t) {
  auto& st = resources_[resource];
  if (st.holder >= 0 && st.holder != holder)
    throw SchedulerError(resource + " is still held by cell " + std::to_string(st.holder));
  const double grant = std::max(t, st.free_at);
  st.holder = holder;
  st.since = grant;
  return grant;
}

void ResourceRegistry::release(const std::string& resource, int holder, double t) {
  auto& st = resources_[resource];
  if (st.holder != holder) throw SchedulerError(resource + " released by a non-holder");
  st.history.push_back({holder, st.since, t});
  st.holder = -1;
  st.free_at = t;
}

bool ResourceRegistry::held(const std::string& resource) const {
  auto it = resources_.find(resource);
  return it != resources_.end() && it->second.holder >= 0;
}

const std::vector<ResourceRegistry::Hold>& ResourceRegistry::holds(const std::string& resource) const {
  static const std::vector<Hold> kNone;
  auto it = resources_.find(resource);
  return it == resources_.end() ? kNone : it->second.history;
}

// ---------------------------------------------------------------------------

void AssemblyConfig::validate() const {
  if (!(per_cell_s > 0.0)) throw ConfigError("assembly.per_cell_s", "must be > 0");
  if (!(p_fail >= 0.0 && p_fail <= 1.0)) throw ConfigError("assembly.p_fail", "must lie in [0, 1]");
  if (max_retries < 0) throw ConfigError("assembly.max_retries", "must be >= 0");
  if (!(electrolyte_ul > 0.0)) throw ConfigError("assembly.electrolyte_ul", "must be > 0");
}

double AssemblyConfig::step_duration(double formulation_s) const {
  const double remaining = per_cell_s - formulation_s;
  if (remaining <= 0.0)
    throw ConfigError("timing.per_cell_s", "formulation alone exceeds the per-cell budget");
  return remaining / static_cast<double>(kCanonicalSequence.size());
}

double per_step_hazard(double p_fail) {
  if (p_fail <= 0.0) return 0.0;
  if (p_fail >= 1.0) return 1.0;
  return 1.0 - std::pow(1.0 - p_fail, 1.0 / kFailureEligibleSteps);
}

AssemblyResult assemble_cell(int cell_id, const ComponentSet& set, double electrolyte_ul,
                             ResourceRegistry& resources, Rng& rng, double clock_s,
                             double step_duration_s, double p_fail) {
  AssemblyResult result;
  result.cell_id = cell_id;
  result.set = set;
  result.electrolyte_ul = electrolyte_ul;

  const double hazard = per_step_hazard(p_fail);
  double t = resources.acquire("robot_arm", cell_id, clock_s);
  result.started_s = t;

  for (std::size_t i = 0; i < kCanonicalSequence.size(); ++i) {
    const Step step = kCanonicalSequence[i];
    const std::string_view tag = resource_for(step);
    std::string side;  // crimper / liquid handler held only for their step
    if (step == Step::crimp) side = "crimper";
    if (step == Step::dispense_electrolyte) side = "liquid_handler";
    if (!side.empty()) t = resources.acquire(side, cell_id, t);

    result.trace.push_back({step, t, step_duration_s, std::string(tag)});
    t += step_duration_s;
    if (!side.empty()) resources.release(side, cell_id, t);

    const bool eligible = static_cast<int>(i) < kFailureEligibleSteps;
    if (eligible && rng.bernoulli(hazard)) {
      result.failure_step = step;
      break;
    }
  }
  resources.release("robot_arm", cell_id, t);
  result.finished_s = t;
  result.success = !result.failure_step.has_value();
  return result;
}

// ---------------------------------------------------------------------------

AssemblyLine::AssemblyLine(AssemblyConfig config, PlateInventory& inventory,
                           ResourceRegistry& resources, Rng& rng)
    : config_(config), inventory_(inventory), resources_(resources), rng_(rng) {
  config_.validate();
}

void AssemblyLine::start(sched::Simulator& sim, std::vector<CellJob> jobs, HandoffFn on_handoff) {
  jobs_ = std::move(jobs);
  on_handoff_ = std::move(on_handoff);
  if (jobs_.empty()) return;
  sim.schedule_internal(sim.now(), [this](sched::Simulator& s, const sched::Event&) { run_job(s, 0, 0); });
}

void AssemblyLine::run_job(sched::Simulator& sim, std::size_t index, int attempt) {
  const CellJob& job = jobs_[index];
  const int id = job.cell_id;

  // Retries are only scheduled while sets remain, so this throws only when
  // the first attempt of a cell finds the plates empty.
  const ComponentSet set = inventory_.next_component_set();

  const double t0 = sim.now();
  sim.record(sched::EventKind::assembly_start, id,
             {{"attempt", attempt}, {"plate", set.plate_index}, {"slot", set.slot_index}});

  const auto formulation = formulation::execute_formulation(job.plan, t0);
  const double lh = resources_.acquire("liquid_handler", id, t0);
  for (const auto& ev : formulation.events) {
    sim.schedule(ev.timestamp_s + (lh - t0), sched::EventKind::formulation_step, id,
                 {{"step", formulation::to_string(ev.step.kind)},
                  {"source", ev.step.source},
                  {"volume_ul", ev.step.volume_ul},
                  {"duration_s", ev.step.duration_s}});
  }
  const double ready = lh + formulation.elapsed_s;
  resources_.release("liquid_handler", id, ready);

  const double step_s = config_.step_duration(job.plan.estimated_duration_s);
  AssemblyResult result =
      assemble_cell(id, set, config_.electrolyte_ul, resources_, rng_, ready, step_s, config_.p_fail);
  result.attempt = attempt;

  for (const auto& entry : result.trace) {
    sched::Payload p{{"step", to_string(entry.step)}, {"resource", entry.resource}};
    if (entry.step == Step::dispense_electrolyte) p["volume_ul"] = result.electrolyte_ul;
    sim.schedule(entry.timestamp_s, sched::EventKind::assembly_step, id, std::move(p));
  }
  results_.push_back(result);

  const double done = result.finished_s;
  const bool retry = !result.success && attempt < config_.max_retries && inventory_.remaining() > 0;
  if (result.success) {
    sim.schedule_internal(done, [this, r = result](sched::Simulator&, const sched::Event&) {
      if (on_handoff_) on_handoff_(r);
    });
  } else {
    sim.schedule(done, sched::EventKind::assembly_failed, id,
                 {{"attempt", attempt}, {"failure_step", to_string(*result.failure_step)}});
  }

  if (retry) {
    sim.schedule_internal(done, [this, index, attempt](sched::Simulator& s, const sched::Event&) {
      run_job(s, index, attempt + 1);
    });
  } else if (index + 1 < jobs_.size()) {
    sim.schedule_internal(done, [this, index](sched::Simulator& s, const sched::Event&) {
      run_job(s, index + 1, 0);
    });
  }
}

std::vector<AssemblyResult> run_campaign_assembly(int n_cells, const AssemblyConfig& config,
                                                  const formulation::PipettingPlan& plan, Rng& rng,
                                                  double clock_s) {
  if (n_cells < 0) throw ConfigError("n_cells", "must be >= 0");
  if (n_cells > PlateInventory::kCapacity)
    throw InventoryDepleted("more cells requested than the plates hold");
  PlateInventory inventory;
  ResourceRegistry resources;
  sched::Simulator sim;
  sim.schedule_internal(clock_s, {});
  sim.run();
  AssemblyLine line(config, inventory, resources, rng);
  std::vector<CellJob> jobs;
  for (int i = 0; i < n_cells; ++i) jobs.push_back({i, plan});
  line.start(sim, std::move(jobs));
  sim.run();
  return line.results();
}

}  // namespace celllab::assembly
