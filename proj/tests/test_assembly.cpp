#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "celllab/assembly.hpp"
#include "celllab/errors.hpp"

using namespace celllab;
using namespace celllab::assembly;

namespace {

formulation::PipettingPlan reference_plan() {
  formulation::StockSolution s;
  s.id = "s2";
  s.salt = "LiPF6";
  s.concentration = 2.0;
  s.solvent_blend = {{"EC", 0.3}, {"EMC", 0.7}};
  return formulation::plan_recipe(formulation::ElectrolyteRecipe::reference(), std::vector{s});
}

bool overlapping(std::vector<ResourceRegistry::Hold> h) {
  std::sort(h.begin(), h.end(), [](auto& a, auto& b) { return a.start_s < b.start_s; });
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i].start_s < h[i - 1].end_s) return true;
  return false;
}

}  // namespace

TEST_CASE("inventory hands out sets in plate order") {
  PlateInventory inv;
  CHECK(inv.pick_positions().size() == 8);
  auto first = inv.next_component_set();
  CHECK(first.plate_index == 0);
  CHECK(first.slot_index == 0);
  CHECK(first.components.size() == 7);
  for (int i = 1; i < 12; ++i) inv.next_component_set();
  auto thirteenth = inv.next_component_set();
  CHECK(thirteenth.plate_index == 1);
  CHECK(thirteenth.slot_index == 0);
  for (int i = 13; i < 48; ++i) {
    inv.next_component_set();
    CHECK(inv.consumed() + inv.remaining() == 48);
  }
  CHECK(inv.remaining() == 0);
  CHECK_THROWS_AS(inv.next_component_set(), InventoryDepleted);
}

TEST_CASE("p_fail = 0 gives the full canonical trace") {
  ResourceRegistry reg;
  Rng rng(1);
  auto r = assemble_cell(0, {}, 70.0, reg, rng, 0.0, 1.2, 0.0);
  CHECK(r.success);
  CHECK_FALSE(r.failure_step.has_value());
  REQUIRE(r.trace.size() == kCanonicalSequence.size());
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].step == kCanonicalSequence[i]);
    if (r.trace[i].step == Step::place_spring) CHECK(r.trace[i].resource == "robot_arm:parallel_gripper");
    else if (to_string(r.trace[i].step).starts_with("place_")) CHECK(r.trace[i].resource == "robot_arm:vacuum_gripper");
  }
  CHECK(r.finished_s == doctest::Approx(12.0));
  CHECK_FALSE(reg.held("robot_arm"));
  CHECK_FALSE(reg.held("crimper"));
}

TEST_CASE("p_fail = 1 fails at the first eligible step and releases everything") {
  ResourceRegistry reg;
  Rng rng(1);
  auto r = assemble_cell(0, {}, 70.0, reg, rng, 0.0, 1.0, 1.0);
  CHECK_FALSE(r.success);
  REQUIRE(r.failure_step.has_value());
  CHECK(*r.failure_step == Step::place_can);
  CHECK(r.trace.size() == 1);
  CHECK_FALSE(reg.held("robot_arm"));
}

TEST_CASE("per-step hazard composes to the per-cell probability") {
  const double p = 2.0 / 87.0;
  const double h = per_step_hazard(p);
  CHECK(1.0 - std::pow(1.0 - h, kFailureEligibleSteps) == doctest::Approx(p).epsilon(1e-12));
  CHECK(per_step_hazard(0.0) == 0.0);
  CHECK(per_step_hazard(1.0) == 1.0);
}

TEST_CASE("crimper is held only during crimp, the arm never by two cells") {
  AssemblyConfig cfg;
  cfg.p_fail = 0.2;
  cfg.max_retries = 1;
  Rng rng(3);
  PlateInventory inv;
  ResourceRegistry reg;
  sched::Simulator sim;
  AssemblyLine line(cfg, inv, reg, rng);
  std::vector<CellJob> jobs;
  for (int i = 0; i < 20; ++i) jobs.push_back({i, reference_plan()});
  line.start(sim, jobs);
  sim.run();
  CHECK_FALSE(overlapping(reg.holds("robot_arm")));
  CHECK_FALSE(overlapping(reg.holds("crimper")));
  CHECK_FALSE(overlapping(reg.holds("liquid_handler")));
  for (const auto& h : reg.holds("crimper")) CHECK(h.end_s - h.start_s == doctest::Approx(cfg.step_duration(reference_plan().estimated_duration_s)));
  CHECK(inv.consumed() == static_cast<int>(line.results().size()));
}

TEST_CASE("campaign assembly timing") {
  AssemblyConfig cfg;
  cfg.p_fail = 0.0;
  Rng rng(1);
  const auto plan = reference_plan();
  CHECK(run_campaign_assembly(0, cfg, plan, rng).empty());
  auto one = run_campaign_assembly(1, cfg, plan, rng);
  REQUIRE(one.size() == 1);
  CHECK(one[0].finished_s == doctest::Approx(240.0));
  auto all = run_campaign_assembly(48, cfg, plan, rng);
  REQUIRE(all.size() == 48);
  CHECK(all.back().finished_s / 60.0 == doctest::Approx(192.0));
  CHECK_THROWS_AS(run_campaign_assembly(49, cfg, plan, rng), InventoryDepleted);
}

TEST_CASE("same seed, same failure pattern") {
  AssemblyConfig cfg;
  cfg.p_fail = 0.3;
  const auto plan = reference_plan();
  Rng a(77), b(77);
  auto ra = run_campaign_assembly(48, cfg, plan, a);
  auto rb = run_campaign_assembly(48, cfg, plan, b);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].success == rb[i].success);
    CHECK(ra[i].trace.size() == rb[i].trace.size());
    CHECK(ra[i].finished_s == rb[i].finished_s);
  }
}

TEST_CASE("formulation that overruns the slot is a config error") {
  AssemblyConfig cfg;
  cfg.per_cell_s = 100.0;
  CHECK_THROWS_AS(cfg.step_duration(150.0), ConfigError);
}
