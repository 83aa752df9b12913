#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "celllab/campaign.hpp"
#include "celllab/errors.hpp"

using namespace celllab;
using namespace celllab::campaign;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("celllab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string field_of(const json& j) {
  try {
    CampaignConfig::from_json(j).validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_file(e.path());
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CELLLAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

json small_eis(int n) {
  return {{"name", "small"},
          {"seed", 3},
          {"n_cells", n},
          {"protocol", {{"name", "eis-rate"}, {"formation_cycles", 1}, {"cycles_per_rate", 1}}},
          {"assembly", {{"p_fail", 0.1}, {"max_retries", 1}}}};
}

}  // namespace

TEST_CASE("config errors name the field") {
  CHECK(field_of({{"n_cells", 1}}) == "seed");
  CHECK(field_of({{"seed", 1}, {"n_cells", 49}}) == "n_cells");
  const json ok_recipe = {{"replicates", 1},
                          {"salts", json::array({{{"species", "LiPF6"}, {"molarity", 1.0}}})},
                          {"solvents", json::array({{{"name", "EC"}, {"fraction", 0.3}}, {{"name", "EMC"}, {"fraction", 0.7}}})}};
  CHECK(field_of({{"seed", 1}, {"n_cells", 2}, {"recipes", json::array({ok_recipe})}}) == "recipes");
  CHECK(field_of({{"seed", 1}, {"n_cells", 1}, {"recipes", json::array({ok_recipe})}}).empty());
  CHECK(field_of({{"seed", 1}, {"n_cells", 1}, {"recipes", json::array({{{"replicates", 1}}})}}) == "recipes[0]");
  CHECK(field_of({{"seed", 1}, {"bogus", 1}}) == "bogus");
  CHECK(field_of({{"seed", 1}, {"assembly", {{"p_fail", 1.5}}}}) == "assembly.p_fail");
  CHECK(field_of({{"seed", 1}, {"protocol", {{"name", "other"}}}}) == "protocol.name");
  CHECK(field_of({{"seed", 1}, {"channels", {{"eis_binding", "x"}}}}) == "channels.eis_binding");
  CHECK(field_of({{"seed", "one"}}) == "seed");
  CHECK(field_of({{"seed", 1}, {"population_noise", {{"capacity_rsd", -1}}}}) == "population_noise.capacity_rsd");
  CHECK(field_of({{"seed", 1}, {"cell", {{"circuit", {{"arcs", json::array()}}}}}}) == "cell.circuit.arcs");
  CHECK(field_of({{"seed", 1}, {"n_cells", 3}}).empty());
}

TEST_CASE("committed example configs load and validate") {
  for (const char* name : {"reproducibility.json", "eis_rate.json", "throughput48.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(CampaignConfig::load(fs::path(CELLLAB_SOURCE_DIR) / "config" / name).validate());
  }
}

TEST_CASE("workload segments follow the protocol run") {
  const auto run = cell::run_protocol(cell::CellParameters{}, cell::eis_rate_protocol());
  const auto w = workload_from_run(4, run);
  REQUIRE(w.segments.size() == 4);
  double t = 0;
  for (const auto& s : w.segments) {
    CHECK(s.eis);
    CHECK(s.rest_s == 1800.0);
    t += s.cycling_s + s.rest_s;
  }
  CHECK(t == doctest::Approx(run.total_s));
  const auto plain = workload_from_run(1, cell::run_protocol(cell::CellParameters{}, cell::reproducibility_protocol(1, 2)));
  REQUIRE(plain.segments.size() == 1);
  CHECK_FALSE(plain.segments[0].eis);
}

TEST_CASE("campaign output tree, completeness and determinism") {
  const auto root_a = scratch("a"), root_b = scratch("b");
  const auto cfg = CampaignConfig::from_json(small_eis(6));
  const auto res = run_campaign(cfg, root_a);
  run_campaign(cfg, root_b);

  CHECK(fs::exists(res.events));
  CHECK(fs::exists(res.fits));
  CHECK(fs::exists(res.stats));
  CHECK(res.cycling.size() == 6);
  CHECK(fs::exists(root_a / "small" / "cells" / "000" / "cycling.csv"));
  CHECK(fs::exists(root_a / "small" / "cells" / "000" / "eis_3.csv"));

  std::ifstream ev(res.events);
  const auto log = sched::EventLog::read_jsonl(ev);
  std::size_t triggers = 0;
  for (const auto& e : log.events()) triggers += e.kind == sched::EventKind::eis_trigger;
  CHECK(triggers == res.fit_rows.size());
  CHECK(res.spectra.size() == res.fit_rows.size());
  CHECK(res.fit_rows.size() == 4 * res.cycling.size());

  CHECK(tree(root_a) == tree(root_b));

  auto other = cfg;
  other.seed = 4;
  const auto root_c = scratch("c");
  run_campaign(other, root_c);
  CHECK(tree(root_a) != tree(root_c));
}

TEST_CASE("empty campaign") {
  auto j = small_eis(0);
  const auto res = run_campaign(CampaignConfig::from_json(j), scratch("empty"));
  CHECK(res.cycling.empty());
  CHECK(fs::exists(res.stats));
  CHECK(io::read_file(res.fits) == "cell_id,trigger,r1,r2,c2,r3,c3,r4,c4,residual,converged\n");
}

TEST_CASE("throughput arithmetic") {
  CHECK(monthly_capacity(30, 6, 48) == 240);
  CHECK(monthly_capacity(30, 7, 48) == 192);
  auto cfg = CampaignConfig::from_json({{"seed", 1}, {"n_cells", 1}});
  const auto one = throughput(cfg);
  CHECK(one.assembly_makespan_s == doctest::Approx(240.0));
  cfg = CampaignConfig::from_json({{"seed", 1}, {"n_cells", 48}});
  const auto all = throughput(cfg);
  CHECK(all.assembly_makespan_s / 60.0 == doctest::Approx(192.0));
  CHECK(all.monthly_capacity == 240);
}

TEST_CASE("capacity reporting points") {
  std::map<int, cell::CyclingRecord> recs;
  CHECK_THROWS_AS(capacity_reporting_points(recs), TooFewSamples);
  cell::CellParameters p;
  p.fade_per_cycle = 0.0;
  const auto run = cell::run_protocol(p, cell::reproducibility_protocol());
  recs[0] = run.record;
  CHECK_THROWS_AS(capacity_reporting_points(recs), TooFewSamples);
  recs[1] = run.record;
  const auto pts = capacity_reporting_points(recs);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].cycle == 1);
  CHECK(pts[1].cycle == 52);
  CHECK(pts[0].summary.rsd == 0.0);
  CHECK(pts[1].summary.rsd == 0.0);
}

TEST_CASE("cycling and spectrum CSV round trip") {
  const auto run = cell::run_protocol(cell::CellParameters{}, cell::reproducibility_protocol(1, 3));
  std::stringstream ss;
  io::write_cycling_csv(ss, run.record);
  const auto back = io::read_cycling_csv(ss);
  REQUIRE(back.rows.size() == run.record.rows.size());
  CHECK(back.rows[2].discharge_mah == doctest::Approx(run.record.rows[2].discharge_mah).epsilon(1e-6));

  std::stringstream empty;
  CHECK_THROWS_AS(io::read_spectrum_csv(empty), ParseError);
  std::stringstream header_only("freq_hz,re_z_ohm,im_z_ohm\n");
  CHECK_THROWS_AS(io::read_spectrum_csv(header_only), ParseError);
  std::stringstream junk("freq_hz,re_z_ohm,im_z_ohm\n10,abc,1\n");
  CHECK_THROWS_AS(io::read_spectrum_csv(junk), ParseError);
}

TEST_CASE("CLI exit codes and subcommands") {
  const auto dir = scratch("cli");
  const fs::path src(CELLLAB_SOURCE_DIR);
  CHECK(run_cli("throughput --config " + (src / "config/throughput48.json").string()) == 0);

  std::ofstream(dir / "bad.json") << R"({"seed": 1, "n_cells": 99})";
  CHECK(run_cli("throughput --config " + (dir / "bad.json").string()) == 2);
  CHECK(run_cli("simulate --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);

  std::ofstream(dir / "small.json") << small_eis(3).dump();
  CHECK(run_cli("simulate --quiet --config " + (dir / "small.json").string() + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "small" / "fits.csv"));
  CHECK(run_cli("stats " + (dir / "out" / "small").string()) == 0);

  std::ofstream(dir / "empty.csv") << "";
  const auto spectrum = (dir / "out" / "small" / "cells" / "000" / "eis_0.csv").string();
  CHECK(run_cli("fit-eis " + spectrum) == 0);
  CHECK(run_cli("fit-eis " + spectrum + " " + (dir / "empty.csv").string()) == 1);

  // one record is too few for statistics
  fs::remove_all(dir / "one");
  fs::create_directories(dir / "one" / "cells" / "000");
  fs::copy(dir / "out" / "small" / "cells" / "000" / "cycling.csv", dir / "one" / "cells" / "000" / "cycling.csv");
  CHECK(run_cli("stats " + (dir / "one").string()) == 1);
}
