#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "celllab/formulation.hpp"
#include "celllab/rng.hpp"
#include "celllab/scheduler.hpp"

namespace celllab::assembly {

enum class Component { can, anode, separator, cathode, spring, spacer, cap };

inline constexpr std::array<Component, 7> kComponents{
    Component::can,    Component::anode,  Component::separator, Component::cathode,
    Component::spring, Component::spacer, Component::cap,
};

std::string_view to_string(Component c);

struct ComponentSet {
  std::array<Component, 7> components = kComponents;
  int plate_index = 0;
  int slot_index = 0;

  bool operator==(const ComponentSet&) const = default;
};

struct PickPosition {
  std::string name;
  double x_mm = 0.0;
  double y_mm = 0.0;
  double z_mm = 0.0;
};

/// Four rotary plates of twelve component sets. The robot only ever picks
/// from eight calibrated positions; the plates rotate parts into them.
class PlateInventory {
 public:
  static constexpr int kPlates = 4;
  static constexpr int kSlotsPerPlate = 12;
  static constexpr int kCapacity = kPlates * kSlotsPerPlate;

  PlateInventory();

  /// Lowest unconsumed (plate, slot); marks it consumed.
  ComponentSet next_component_set();

  int consumed() const noexcept { return consumed_count_; }
  int remaining() const noexcept { return kCapacity - consumed_count_; }
  bool is_consumed(int plate, int slot) const;
  const std::array<PickPosition, 8>& pick_positions() const noexcept { return pick_positions_; }

 private:
  std::array<bool, kCapacity> consumed_{};
  int consumed_count_ = 0;
  std::array<PickPosition, 8> pick_positions_;
};

ComponentSet next_component_set(PlateInventory& inventory);

enum class Step {
  place_can,
  place_anode,
  place_separator,
  dispense_electrolyte,
  place_cathode,
  place_spring,
  place_spacer,
  place_cap,
  crimp,
  handoff_to_gantry,
};

inline constexpr std::array<Step, 10> kCanonicalSequence{
    Step::place_can,     Step::place_anode,  Step::place_separator, Step::dispense_electrolyte,
    Step::place_cathode, Step::place_spring, Step::place_spacer,    Step::place_cap,
    Step::crimp,         Step::handoff_to_gantry,
};

/// Steps at which a cell can be lost (everything before the handoff).
inline constexpr int kFailureEligibleSteps = 9;

std::string_view to_string(Step s);
/// Resource tag for a step, e.g. "robot_arm:vacuum_gripper".
std::string_view resource_for(Step s);

/// Exclusive resources (robot arm, crimper, liquid handler, gantries).
/// Acquisition never fails: a busy resource turns into a wait.
class ResourceRegistry {
 public:
  struct Hold {
    int holder;
    double start_s;
    double end_s;
  };

  /// Earliest time >= t at which `holder` gets the resource.
  double acquire(const std::string& resource, int holder, double t);
  void release(const std::string& resource, int holder, double t);

  bool held(const std::string& resource) const;
  const std::vector<Hold>& holds(const std::string& resource) const;

 private:
  struct State {
    int holder = -1;
    double since = 0.0;
    double free_at = 0.0;
    std::vector<Hold> history;
  };
  std::map<std::string, State> resources_;
};

struct TraceEntry {
  Step step;
  double timestamp_s;
  double duration_s;
  std::string resource;
};

struct AssemblyResult {
  int cell_id = -1;
  int attempt = 0;
  bool success = false;
  std::optional<Step> failure_step;
  double started_s = 0.0;
  double finished_s = 0.0;
  double electrolyte_ul = 0.0;
  ComponentSet set;
  std::vector<TraceEntry> trace;
};

struct AssemblyConfig {
  /// Formulation + assembly + handoff for one cell.
  double per_cell_s = 240.0;
  double p_fail = 2.0 / 87.0;
  int max_retries = 0;
  double electrolyte_ul = 70.0;

  void validate() const;
  /// Uniform per-step time once formulation has used its share of the slot.
  double step_duration(double formulation_s) const;
};

/// Hazard per eligible step such that a full pass fails with probability p.
double per_step_hazard(double p_fail);

/// Runs the canonical sequence for one cell starting at `clock_s`.
/// The robot arm is held for the whole sequence, the crimper only during
/// crimp and the liquid handler only while dispensing. On failure the trace
/// ends at the failing step and everything is released.
AssemblyResult assemble_cell(int cell_id, const ComponentSet& set, double electrolyte_ul,
                             ResourceRegistry& resources, Rng& rng, double clock_s,
                             double step_duration_s, double p_fail);

struct CellJob {
  int cell_id = -1;
  formulation::PipettingPlan plan;
};

/// Serial formulation + assembly of a list of cells on a shared event loop.
class AssemblyLine {
 public:
  using HandoffFn = std::function<void(const AssemblyResult&)>;

  AssemblyLine(AssemblyConfig config, PlateInventory& inventory, ResourceRegistry& resources,
               Rng& rng);

  /// Schedules the first cell at sim.now(); later cells follow as the arm
  /// frees up. `on_handoff` runs at each successful handoff.
  void start(sched::Simulator& sim, std::vector<CellJob> jobs, HandoffFn on_handoff = {});

  const std::vector<AssemblyResult>& results() const noexcept { return results_; }

 private:
  void run_job(sched::Simulator& sim, std::size_t index, int attempt);

  AssemblyConfig config_;
  PlateInventory& inventory_;
  ResourceRegistry& resources_;
  Rng& rng_;
  std::vector<CellJob> jobs_;
  HandoffFn on_handoff_;
  std::vector<AssemblyResult> results_;
};

/// Standalone stage I+II run with one plan shared by every cell.
/// Throws InventoryDepleted if n_cells exceeds the plates.
std::vector<AssemblyResult> run_campaign_assembly(int n_cells, const AssemblyConfig& config,
                                                  const formulation::PipettingPlan& plan, Rng& rng,
                                                  double clock_s = 0.0);

}  // namespace celllab::assembly
