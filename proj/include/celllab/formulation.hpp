#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace celllab::formulation {

struct SolventShare {
  std::string name;
  double fraction = 0.0;  // volume fraction
};

/// A concentrated salt solution on the liquid-handler deck.
struct StockSolution {
  std::string id;
  std::string salt;
  double concentration = 0.0;  // mol/L
  std::vector<SolventShare> solvent_blend;
  bool requires_heating = false;
  std::optional<double> heat_setpoint_c;

  void validate(double ambient_c = 25.0) const;
};

struct SaltTarget {
  std::string species;
  double molarity = 0.0;
};

struct AdditiveTarget {
  std::string species;
  double wt_percent = 0.0;
};

struct ElectrolyteRecipe {
  std::vector<SaltTarget> salt_targets;
  std::vector<SolventShare> solvent_fractions;
  std::vector<AdditiveTarget> additives;
  double total_volume_ul = 0.0;

  void validate() const;

  /// 1 M LiPF6 in EC:EMC 3:7 (vol) with 2 wt% VC, 70 uL per cell.
  static ElectrolyteRecipe reference();
};

enum class StepKind { aspirate, dispense, tip_touch, mix, wait_heat };

std::string_view to_string(StepKind kind);

struct PipettingStep {
  StepKind kind = StepKind::aspirate;
  std::string source{};
  std::string dest{};
  double volume_ul = 0.0;
  int repetitions = 0;
  double duration_s = 0.0;
  double setpoint_c = 0.0;  // wait_heat only

  bool operator==(const PipettingStep&) const = default;
};

struct PipettingPlan {
  std::vector<PipettingStep> steps;
  double estimated_duration_s = 0.0;

  bool operator==(const PipettingPlan&) const = default;
};

/// Neat liquid (solvent or additive) available for dilution.
struct PureReagent {
  std::string name;
  double density_g_per_ml = 1.0;
  bool requires_heating = false;
  std::optional<double> heat_setpoint_c;
};

/// Deck contents and liquid-handler timing. Values not tied to a recipe.
struct FormulationSettings {
  std::vector<PureReagent> reagents;
  /// Bulk density used to turn additive wt% into a mass, then a volume.
  double electrolyte_density_g_per_ml = 1.20;
  double min_volume_ul = 1.0;
  double ambient_c = 25.0;

  double aspirate_s = 5.0;
  double dispense_s = 5.0;
  double tip_touch_s = 2.0;
  /// Time to bring the heater block to setpoint; 0 when it is kept hot.
  double heat_up_s = 0.0;
  int mix_strokes = 20;
  double mix_s = 180.0;

  std::string destination = "cell_vial";

  const PureReagent* find_reagent(std::string_view name) const;

  /// EC (held at 60 C), EMC, DMC, DEC and VC with handbook densities.
  static FormulationSettings defaults();
};

struct DilutionVolumes {
  double stock_ul = 0.0;
  double diluent_ul = 0.0;
};

/// Volumes of stock and neat solvent giving `target_m` in `total_ul`.
DilutionVolumes plan_dilution(double stock_m, double target_m, double total_ul);

/// Builds the liquid-handler step list for one cell's electrolyte.
///
/// Each salt comes from the least concentrated compatible stock that still
/// reaches its target; the remaining volume is made up from neat solvents in
/// the recipe ratio and neat additives. Every aspirate is followed by a tip
/// touch, heated sources get a wait_heat before their first aspirate, and the
/// plan ends with a single mix step.
PipettingPlan plan_recipe(const ElectrolyteRecipe& recipe,
                          std::span<const StockSolution> stocks,
                          const FormulationSettings& settings = FormulationSettings::defaults());

struct FormulationEvent {
  double timestamp_s = 0.0;
  std::size_t step_index = 0;
  PipettingStep step;
};

struct FormulationEvents {
  std::vector<FormulationEvent> events;
  double start_s = 0.0;
  double elapsed_s = 0.0;
};

/// Lays the plan out on the simulation clock, one event per step at its
/// start time.
FormulationEvents execute_formulation(const PipettingPlan& plan, double clock_s);

}  // namespace celllab::formulation
