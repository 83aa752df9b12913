#include "celllab/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "celllab/errors.hpp"

namespace celllab::formulation {
namespace {

constexpr double kFractionTol = 1e-9;

double fraction_sum(const std::vector<SolventShare>& shares) {
  double sum = 0.0;
  for (const auto& s : shares) sum += s.fraction;
  return sum;
}

bool same_blend(const std::vector<SolventShare>& a, const std::vector<SolventShare>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& share : a) {
    auto it = std::find_if(b.begin(), b.end(),
                           [&](const SolventShare& o) { return o.name == share.name; });
    if (it == b.end() || std::abs(it->fraction - share.fraction) > kFractionTol) return false;
  }
  return true;
}

struct Transfer {
  std::string source;
  double volume_ul;
  bool heated;
  double setpoint_c;
};

}  // namespace

void StockSolution::validate(double ambient_c) const {
  if (!(concentration > 0.0)) throw InvalidRecipe("stock " + id + ": concentration must be > 0");
  if (std::abs(fraction_sum(solvent_blend) - 1.0) > kFractionTol)
    throw InvalidRecipe("stock " + id + ": solvent fractions must sum to 1");
  if (requires_heating != heat_setpoint_c.has_value())
    throw InvalidRecipe("stock " + id + ": heat_setpoint present iff requires_heating");
  if (heat_setpoint_c && *heat_setpoint_c < ambient_c)
    throw InvalidRecipe("stock " + id + ": heat_setpoint below ambient");
}

void ElectrolyteRecipe::validate() const {
  if (!(total_volume_ul > 0.0)) throw NonPositiveVolume("recipe total_volume must be > 0");
  if (std::abs(fraction_sum(solvent_fractions) - 1.0) > kFractionTol)
    throw InvalidRecipe("recipe solvent fractions must sum to 1");
  for (const auto& s : solvent_fractions)
    if (s.fraction < 0.0) throw InvalidRecipe("negative solvent fraction for " + s.name);
  for (const auto& t : salt_targets)
    if (!(t.molarity > 0.0)) throw InvalidRecipe("salt " + t.species + ": molarity must be > 0");
  for (const auto& a : additives)
    if (!(a.wt_percent > 0.0 && a.wt_percent < 100.0))
      throw InvalidRecipe("additive " + a.species + ": wt% must lie in (0, 100)");
}

ElectrolyteRecipe ElectrolyteRecipe::reference() {
  return ElectrolyteRecipe{
      .salt_targets = {{"LiPF6", 1.0}},
      .solvent_fractions = {{"EC", 0.3}, {"EMC", 0.7}},
      .additives = {{"VC", 2.0}},
      .total_volume_ul = 70.0,
  };
}

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::aspirate: return "aspirate";
    case StepKind::dispense: return "dispense";
    case StepKind::tip_touch: return "tip_touch";
    case StepKind::mix: return "mix";
    case StepKind::wait_heat: return "wait_heat";
  }
  return "unknown";
}

const PureReagent* FormulationSettings::find_reagent(std::string_view name) const {
  auto it = std::find_if(reagents.begin(), reagents.end(),
                         [&](const PureReagent& r) { return r.name == name; });
  return it == reagents.end() ? nullptr : &*it;
}

FormulationSettings FormulationSettings::defaults() {
  FormulationSettings s;
  // EC melts at ~36 C and is kept molten on the heater block.
  s.reagents = {
      {"EC", 1.32, true, 60.0},
      {"EMC", 1.01, false, std::nullopt},
      {"DMC", 1.07, false, std::nullopt},
      {"DEC", 0.975, false, std::nullopt},
      {"VC", 1.355, false, std::nullopt},
  };
  return s;
}

DilutionVolumes plan_dilution(double stock_m, double target_m, double total_ul) {
  if (!(total_ul > 0.0)) throw NonPositiveVolume("total volume must be > 0");
  if (!(target_m > 0.0) || !(stock_m > 0.0))
    throw NonPositiveVolume("concentrations must be > 0");
  if (target_m > stock_m) throw TargetExceedsStock("target concentration exceeds stock");
  const double stock_ul = total_ul * target_m / stock_m;
  return {stock_ul, std::max(0.0, total_ul - stock_ul)};
}

PipettingPlan plan_recipe(const ElectrolyteRecipe& recipe, std::span<const StockSolution> stocks,
                          const FormulationSettings& settings) {
  recipe.validate();
  for (const auto& stock : stocks) stock.validate(settings.ambient_c);

  std::vector<Transfer> transfers;
  double committed_ul = 0.0;

  for (const auto& target : recipe.salt_targets) {
    std::vector<const StockSolution*> same_salt;
    for (const auto& s : stocks)
      if (s.salt == target.species) same_salt.push_back(&s);
    if (same_salt.empty()) throw UnreachableTarget("no stock carries salt " + target.species);

    std::vector<const StockSolution*> compatible;
    for (const auto* s : same_salt)
      if (same_blend(s->solvent_blend, recipe.solvent_fractions)) compatible.push_back(s);
    if (compatible.empty())
      throw IncompatibleSolventBlend("no " + target.species + " stock matches the recipe solvent blend");

    const StockSolution* chosen = nullptr;
    for (const auto* s : compatible) {
      if (s->concentration < target.molarity) continue;
      if (!chosen || s->concentration < chosen->concentration ||
          (s->concentration == chosen->concentration && s->id < chosen->id))
        chosen = s;
    }
    if (!chosen)
      throw UnreachableTarget("no " + target.species + " stock is concentrated enough");

    const auto dil = plan_dilution(chosen->concentration, target.molarity, recipe.total_volume_ul);
    transfers.push_back({chosen->id, dil.stock_ul, chosen->requires_heating,
                         chosen->heat_setpoint_c.value_or(settings.ambient_c)});
    committed_ul += dil.stock_ul;
  }

  // Additive mass is a fraction of the finished electrolyte's mass.
  std::vector<Transfer> additive_transfers;
  const double electrolyte_mass_mg = recipe.total_volume_ul * settings.electrolyte_density_g_per_ml;
  for (const auto& add : recipe.additives) {
    const PureReagent* reagent = settings.find_reagent(add.species);
    if (!reagent) throw UnreachableTarget("no neat reagent for additive " + add.species);
    const double mass_mg = add.wt_percent / 100.0 * electrolyte_mass_mg;
    const double volume_ul = mass_mg / reagent->density_g_per_ml;
    additive_transfers.push_back({reagent->name, volume_ul, reagent->requires_heating,
                                  reagent->heat_setpoint_c.value_or(settings.ambient_c)});
    committed_ul += volume_ul;
  }

  const double diluent_ul = recipe.total_volume_ul - committed_ul;
  if (diluent_ul < -1e-9)
    throw UnreachableTarget("stocks and additives exceed the recipe volume");
  if (diluent_ul > 0.0) {
    for (const auto& share : recipe.solvent_fractions) {
      if (share.fraction <= 0.0) continue;
      const PureReagent* reagent = settings.find_reagent(share.name);
      if (!reagent) throw UnreachableTarget("no neat solvent " + share.name + " for dilution");
      transfers.push_back({reagent->name, diluent_ul * share.fraction, reagent->requires_heating,
                           reagent->heat_setpoint_c.value_or(settings.ambient_c)});
    }
  }
  transfers.insert(transfers.end(), additive_transfers.begin(), additive_transfers.end());

  PipettingPlan plan;
  std::set<std::string> heated_ready;
  for (const auto& t : transfers) {
    if (t.volume_ul <= 0.0) continue;
    if (t.volume_ul < settings.min_volume_ul)
      throw VolumeUnderflow("transfer of " + std::to_string(t.volume_ul) + " uL from " + t.source +
                            " is below the pipetting minimum");
    if (t.heated && !heated_ready.contains(t.source)) {
      plan.steps.push_back({.kind = StepKind::wait_heat,
                            .source = t.source,
                            .duration_s = settings.heat_up_s,
                            .setpoint_c = t.setpoint_c});
      heated_ready.insert(t.source);
    }
    plan.steps.push_back({.kind = StepKind::aspirate,
                          .source = t.source,
                          .volume_ul = t.volume_ul,
                          .duration_s = settings.aspirate_s});
    plan.steps.push_back(
        {.kind = StepKind::tip_touch, .source = t.source, .duration_s = settings.tip_touch_s});
    plan.steps.push_back({.kind = StepKind::dispense,
                          .source = t.source,
                          .dest = settings.destination,
                          .volume_ul = t.volume_ul,
                          .duration_s = settings.dispense_s});
  }
  plan.steps.push_back({.kind = StepKind::mix,
                        .dest = settings.destination,
                        .repetitions = settings.mix_strokes,
                        .duration_s = settings.mix_s});

  for (const auto& s : plan.steps) plan.estimated_duration_s += s.duration_s;
  return plan;
}

FormulationEvents execute_formulation(const PipettingPlan& plan, double clock_s) {
  FormulationEvents out;
  out.start_s = clock_s;
  double t = clock_s;
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    out.events.push_back({t, i, plan.steps[i]});
    t += plan.steps[i].duration_s;
  }
  out.elapsed_s = t - clock_s;
  return out;
}

}  // namespace celllab::formulation
