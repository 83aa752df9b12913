#include "celllab/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "celllab/errors.hpp"

namespace celllab::campaign {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config reading

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  ~Reader() = default;

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "wrong type");
    }
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<int>();
  }

  std::string string(const std::string& key, std::string fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  const json& array(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array");
    return v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw ConfigError(field(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string indexed(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

std::vector<formulation::SolventShare> read_solvents(const json& arr, const std::string& path) {
  std::vector<formulation::SolventShare> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Reader r(arr[i], indexed(path, i));
    formulation::SolventShare s;
    s.name = r.string("name", "");
    s.fraction = r.number("fraction", 0.0);
    r.finish();
    out.push_back(s);
  }
  return out;
}

RecipeGroup read_recipe(const json& j, const std::string& path) {
  Reader r(j, path);
  RecipeGroup g;
  g.label = r.string("label", "recipe");
  g.replicates = r.integer("replicates", 0);
  g.recipe.total_volume_ul = r.number("total_volume_ul", 70.0);
  if (r.has("salts")) {
    const auto& arr = r.array("salts");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader s(arr[i], indexed(r.field("salts"), i));
      g.recipe.salt_targets.push_back({s.string("species", ""), s.number("molarity", 0.0)});
      s.finish();
    }
  }
  if (r.has("solvents")) g.recipe.solvent_fractions = read_solvents(r.array("solvents"), r.field("solvents"));
  if (r.has("additives")) {
    const auto& arr = r.array("additives");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader s(arr[i], indexed(r.field("additives"), i));
      g.recipe.additives.push_back({s.string("species", ""), s.number("wt_percent", 0.0)});
      s.finish();
    }
  }
  r.finish();
  return g;
}

formulation::StockSolution read_stock(const json& j, const std::string& path) {
  Reader r(j, path);
  formulation::StockSolution s;
  s.id = r.string("id", "");
  s.salt = r.string("salt", "");
  s.concentration = r.number("concentration_m", 0.0);
  if (r.has("solvents")) s.solvent_blend = read_solvents(r.array("solvents"), r.field("solvents"));
  s.requires_heating = r.boolean("requires_heating", false);
  if (r.has("heat_setpoint_c")) s.heat_setpoint_c = r.number("heat_setpoint_c", 0.0);
  r.finish();
  return s;
}

eis::CircuitParams read_circuit(const json& j, const std::string& path) {
  Reader r(j, path);
  auto c = eis::CircuitParams::defaults();
  c.r1 = r.number("r1", c.r1);
  if (r.has("arcs")) {
    const auto& arr = r.array("arcs");
    if (arr.size() != 3) throw ConfigError(r.field("arcs"), "expected exactly 3 arcs");
    for (std::size_t i = 0; i < 3; ++i) {
      Reader a(arr[i], indexed(r.field("arcs"), i));
      c.arcs[i].r = a.number("r", c.arcs[i].r);
      c.arcs[i].c = a.number("c", c.arcs[i].c);
      c.arcs[i].alpha = a.number("alpha", c.arcs[i].alpha);
      a.finish();
    }
  }
  r.finish();
  return c;
}

}  // namespace

std::vector<formulation::StockSolution> default_stocks() {
  formulation::StockSolution s;
  s.id = "LiPF6_2M_EC_EMC";
  s.salt = "LiPF6";
  s.concentration = 2.0;
  s.solvent_blend = {{"EC", 0.3}, {"EMC", 0.7}};
  return {s};
}

cell::Protocol ProtocolChoice::build() const {
  if (name == "reproducibility") return cell::reproducibility_protocol(formation_cycles, main_cycles);
  if (name == "eis-rate") return cell::eis_rate_protocol(rest_s, formation_cycles, cycles_per_rate);
  throw ConfigError("protocol.name", "unknown protocol '" + name + "'");
}

CampaignConfig CampaignConfig::from_json(const json& j) {
  CampaignConfig c;
  Reader r(j, "");
  c.name = r.string("name", c.name);
  if (r.has("seed")) {
    const auto& v = r.raw("seed");
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      throw ConfigError("seed", "expected a non-negative integer");
    c.seed = v.get<std::uint64_t>();
  }
  c.n_cells = r.integer("n_cells", 0);
  c.output_dir = r.string("output_dir", c.output_dir);

  if (r.has("protocol")) {
    Reader p(r.raw("protocol"), "protocol");
    c.protocol.name = p.string("name", c.protocol.name);
    c.protocol.formation_cycles = p.integer("formation_cycles", c.protocol.formation_cycles);
    c.protocol.main_cycles = p.integer("main_cycles", c.protocol.main_cycles);
    c.protocol.cycles_per_rate = p.integer("cycles_per_rate", c.protocol.cycles_per_rate);
    c.protocol.rest_s = p.number("rest_s", c.protocol.rest_s);
    p.finish();
  }

  if (r.has("recipes")) {
    const auto& arr = r.array("recipes");
    for (std::size_t i = 0; i < arr.size(); ++i) c.recipes.push_back(read_recipe(arr[i], indexed("recipes", i)));
  }
  if (r.has("stocks")) {
    const auto& arr = r.array("stocks");
    for (std::size_t i = 0; i < arr.size(); ++i) c.stocks.push_back(read_stock(arr[i], indexed("stocks", i)));
  } else {
    c.stocks = default_stocks();
  }

  if (r.has("timing")) {
    Reader t(r.raw("timing"), "timing");
    c.assembly.per_cell_s = t.number("per_cell_s", c.assembly.per_cell_s);
    c.channels.gantry_transfer_s = t.number("gantry_transfer_s", c.channels.gantry_transfer_s);
    c.channels.eis_duration_s = t.number("eis_duration_s", c.channels.eis_duration_s);
    c.channels.min_rest_s = t.number("min_rest_s", c.channels.min_rest_s);
    c.formulation.mix_s = t.number("mix_s", c.formulation.mix_s);
    c.formulation.heat_up_s = t.number("heat_up_s", c.formulation.heat_up_s);
    c.cycle_occupancy_days = t.number("cycle_occupancy_days", c.cycle_occupancy_days);
    c.month_days = t.number("month_days", c.month_days);
    c.sim.dt_s = t.number("dt_s", c.sim.dt_s);
    t.finish();
  }
  if (r.has("channels")) {
    Reader ch(r.raw("channels"), "channels");
    c.channels.cycling_channels = ch.integer("cycling", c.channels.cycling_channels);
    c.channels.eis_channels = ch.integer("eis", c.channels.eis_channels);
    c.channels.gantries = ch.integer("gantries", c.channels.gantries);
    const auto binding = ch.string("eis_binding", "per_bank");
    if (binding == "per_bank") c.channels.binding = sched::EisBinding::per_bank;
    else if (binding == "shared_pool") c.channels.binding = sched::EisBinding::shared_pool;
    else throw ConfigError("channels.eis_binding", "expected per_bank or shared_pool");
    ch.finish();
  }
  if (r.has("assembly")) {
    Reader a(r.raw("assembly"), "assembly");
    c.assembly.p_fail = a.number("p_fail", c.assembly.p_fail);
    c.assembly.max_retries = a.integer("max_retries", c.assembly.max_retries);
    a.finish();
  }
  if (r.has("cell")) {
    Reader p(r.raw("cell"), "cell");
    c.cell.q_nominal_mah = p.number("q_nominal_mah", c.cell.q_nominal_mah);
    c.cell.r_internal_ohm = p.number("r_internal_ohm", c.cell.r_internal_ohm);
    c.cell.fade_per_cycle = p.number("fade_per_cycle", c.cell.fade_per_cycle);
    c.cell.rate_exponent = p.number("rate_exponent", c.cell.rate_exponent);
    c.cell.eis_drift = p.number("eis_drift", c.cell.eis_drift);
    if (p.has("circuit")) c.cell.circuit = read_circuit(p.raw("circuit"), "cell.circuit");
    p.finish();
  }
  if (r.has("population_noise")) {
    Reader n(r.raw("population_noise"), "population_noise");
    c.noise.capacity_rsd = n.number("capacity_rsd", c.noise.capacity_rsd);
    c.noise.resistance_sigma_ohm = n.number("resistance_sigma_ohm", c.noise.resistance_sigma_ohm);
    n.finish();
  }
  if (r.has("eis")) {
    Reader e(r.raw("eis"), "eis");
    c.eis_noise_rel = e.number("noise_rel", c.eis_noise_rel);
    c.eis_points_per_decade = e.number("points_per_decade", c.eis_points_per_decade);
    e.finish();
  }
  r.finish();

  if (c.recipes.empty()) {
    c.recipes.push_back({"reference", formulation::ElectrolyteRecipe::reference(), c.n_cells});
  }
  return c;
}

CampaignConfig CampaignConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return from_json(j);
}

void CampaignConfig::validate() const {
  if (!seed) throw ConfigError("seed", "required; campaigns are never seeded from the clock");
  if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..")
    throw ConfigError("name", "must be a plain directory name");
  if (n_cells < 0 || n_cells > assembly::PlateInventory::kCapacity)
    throw ConfigError("n_cells", "must lie in [0, " + std::to_string(assembly::PlateInventory::kCapacity) + "]");

  int replicates = 0;
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    const auto& g = recipes[i];
    if (g.replicates < 0) throw ConfigError(indexed("recipes", i) + ".replicates", "must be >= 0");
    replicates += g.replicates;
    if (g.replicates == 0) continue;
    try {
      g.recipe.validate();
    } catch (const Error& e) {
      throw ConfigError(indexed("recipes", i), e.what());
    }
  }
  if (replicates != n_cells) throw ConfigError("recipes", "replicates must sum to n_cells");

  for (std::size_t i = 0; i < stocks.size(); ++i) {
    try {
      stocks[i].validate(formulation.ambient_c);
    } catch (const Error& e) {
      throw ConfigError(indexed("stocks", i), e.what());
    }
  }

  if (protocol.name != "reproducibility" && protocol.name != "eis-rate")
    throw ConfigError("protocol.name", "expected reproducibility or eis-rate");
  if (protocol.formation_cycles < 0) throw ConfigError("protocol.formation_cycles", "must be >= 0");
  if (protocol.main_cycles < 1) throw ConfigError("protocol.main_cycles", "must be >= 1");
  if (protocol.cycles_per_rate < 1) throw ConfigError("protocol.cycles_per_rate", "must be >= 1");
  if (protocol.rest_s < channels.min_rest_s)
    throw ConfigError("protocol.rest_s", "must be at least timing.min_rest_s");

  assembly.validate();
  try {
    channels.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("channels", e.what());
  }
  try {
    cell.validate();
  } catch (const Error& e) {
    throw ConfigError("cell", e.what());
  }
  if (!(noise.capacity_rsd >= 0.0)) throw ConfigError("population_noise.capacity_rsd", "must be >= 0");
  if (!(noise.resistance_sigma_ohm >= 0.0))
    throw ConfigError("population_noise.resistance_sigma_ohm", "must be >= 0");
  if (!(eis_noise_rel >= 0.0)) throw ConfigError("eis.noise_rel", "must be >= 0");
  if (!(eis_points_per_decade >= 2.0)) throw ConfigError("eis.points_per_decade", "must be >= 2");
  if (!(sim.dt_s > 0.0)) throw ConfigError("timing.dt_s", "must be > 0");
  if (!(cycle_occupancy_days > 0.0)) throw ConfigError("timing.cycle_occupancy_days", "must be > 0");
  if (!(month_days > 0.0)) throw ConfigError("timing.month_days", "must be > 0");
}

// ---------------------------------------------------------------------------
// Running

sched::CellWorkload workload_from_run(int cell_id, const cell::ProtocolRun& run) {
  sched::CellWorkload w;
  w.cell_id = cell_id;
  double t = 0.0;
  for (const auto& trig : run.triggers) {
    sched::CyclingSegment seg;
    seg.cycling_s = trig.complete_s - t;
    seg.rest_s = trig.ready_s - trig.complete_s;
    seg.eis = true;
    seg.trigger = trig.index;
    seg.cycle = trig.cycle;
    seg.c_rate = trig.c_rate;
    w.segments.push_back(seg);
    t = trig.ready_s;
  }
  if (run.triggers.empty() || run.total_s > t) {
    sched::CyclingSegment seg;
    seg.cycling_s = run.total_s - t;
    w.segments.push_back(seg);
  }
  return w;
}

namespace {

std::string cell_dir_name(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", id);
  return buf;
}

std::vector<assembly::CellJob> build_jobs(const CampaignConfig& config, std::vector<std::string>& labels) {
  std::vector<assembly::CellJob> jobs;
  int id = 0;
  for (std::size_t i = 0; i < config.recipes.size(); ++i) {
    const auto& g = config.recipes[i];
    if (g.replicates == 0) continue;
    formulation::PipettingPlan plan;
    try {
      plan = formulation::plan_recipe(g.recipe, config.stocks, config.formulation);
    } catch (const Error& e) {
      throw ConfigError(indexed("recipes", i), e.what());
    }
    for (int k = 0; k < g.replicates; ++k) {
      jobs.push_back({id++, plan});
      labels.push_back(g.label);
    }
  }
  return jobs;
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& config, const std::filesystem::path& out_root) {
  config.validate();
  namespace fs = std::filesystem;

  CampaignResult result;
  result.root = out_root / config.name;
  const Rng master(*config.seed);
  Rng assembly_rng = master.substream("assembly");
  Rng population_rng = master.substream("population");

  std::vector<std::string> labels;
  auto jobs = build_jobs(config, labels);

  const auto protocol = config.protocol.build();
  std::vector<cell::CellParameters> population;
  if (config.n_cells > 0) population = cell::sample_population(config.cell, config.noise, config.n_cells, population_rng);

  std::map<int, cell::ProtocolRun> runs;
  auto run_for = [&](int id) -> const cell::ProtocolRun& {
    auto it = runs.find(id);
    if (it == runs.end())
      it = runs.emplace(id, cell::run_protocol(population[static_cast<std::size_t>(id)], protocol, config.sim)).first;
    return it->second;
  };

  sched::Simulator sim;
  sched::CharacterizationStage stage(sim, config.channels);
  assembly::PlateInventory inventory;
  assembly::ResourceRegistry registry;
  assembly::AssemblyLine line(config.assembly, inventory, registry, assembly_rng);
  line.start(sim, jobs, [&](const assembly::AssemblyResult& r) {
    result.makespan_s = std::max(result.makespan_s, r.finished_s);
    stage.submit(workload_from_run(r.cell_id, run_for(r.cell_id)), sim.now());
  });
  sim.run();
  if (stage.completed() != stage.submitted()) throw SchedulerError("campaign ended with unfinished cells");

  std::map<int, int> attempts;
  for (const auto& r : line.results()) {
    attempts[r.cell_id] = std::max(attempts[r.cell_id], r.attempt + 1);
    if (!r.success) ++result.failed_assemblies;
  }

  fs::remove_all(result.root);
  fs::create_directories(result.root);
  result.events = result.root / "events.jsonl";
  io::write_file(result.events, sim.log().to_jsonl());

  std::map<int, cell::CyclingRecord> records;
  for (const auto& job : jobs) {
    CellOutcome o;
    o.cell_id = job.cell_id;
    o.recipe = labels[static_cast<std::size_t>(job.cell_id)];
    o.attempts = attempts[job.cell_id];
    o.assembled = runs.contains(job.cell_id);
    if (o.assembled) o.run = runs.at(job.cell_id);
    result.cells.push_back(std::move(o));
  }

  const auto grid = eis::frequency_grid(config.eis_points_per_decade);
  for (const auto& o : result.cells) {
    if (!o.assembled) continue;
    const fs::path dir = result.root / "cells" / cell_dir_name(o.cell_id);
    std::ostringstream cyc;
    io::write_cycling_csv(cyc, o.run.record);
    result.cycling.push_back(dir / "cycling.csv");
    io::write_file(result.cycling.back(), cyc.str());
    records[o.cell_id] = o.run.record;

    for (const auto& trig : o.run.triggers) {
      Rng noise = master.substream("eis-noise", static_cast<std::uint64_t>(o.cell_id) * 1000u +
                                                    static_cast<std::uint64_t>(trig.index));
      auto spectrum = eis::synthesize_spectrum(trig.circuit, grid, config.eis_noise_rel, noise);
      std::ostringstream sp;
      io::write_spectrum_csv(sp, spectrum);
      const fs::path path = dir / ("eis_" + std::to_string(trig.index) + ".csv");
      io::write_file(path, sp.str());
      result.spectra.push_back(path);

      // Fit what was written so fit-eis on the output tree reproduces fits.csv.
      std::istringstream back(sp.str());
      const auto stored = io::read_spectrum_csv(back, path.string());
      result.fit_rows.push_back({o.cell_id, trig.index, eis::fit(stored)});
    }
  }

  std::ostringstream fits;
  io::write_fits_header(fits);
  for (const auto& row : result.fit_rows) io::write_fit_row(fits, row);
  result.fits = result.root / "fits.csv";
  io::write_file(result.fits, fits.str());

  std::ostringstream report;
  report << "campaign " << config.name << "\n";
  report << "seed " << *config.seed << "\n";
  report << "protocol " << protocol.name << "\n";
  report << "cells requested " << config.n_cells << "\n";
  report << "cells assembled " << records.size() << "\n";
  report << "failed assemblies " << result.failed_assemblies << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", result.makespan_s / 60.0);
  report << "assembly makespan_min " << buf << "\n\n";
  if (records.size() >= 2) {
    const int main_index = std::min(50, config.protocol.main_cycles);
    try {
      report << format_capacity_report(capacity_reporting_points(records, main_index));
    } catch (const TooFewSamples& e) {
      report << "capacity statistics unavailable: " << e.what() << "\n";
    }
  } else {
    report << "capacity statistics unavailable: fewer than two assembled cells\n";
  }
  if (!result.fit_rows.empty()) report << "\n" << format_eis_report(result.fit_rows);
  result.stats = result.root / "stats.txt";
  io::write_file(result.stats, report.str());
  return result;
}

// ---------------------------------------------------------------------------
// Throughput

int monthly_capacity(double month_days, double occupancy_days, int channels) {
  if (!(occupancy_days > 0.0)) throw ConfigError("timing.cycle_occupancy_days", "must be > 0");
  return static_cast<int>(std::floor(month_days / occupancy_days)) * channels;
}

std::string ThroughputReport::to_text() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "cells %d\n"
                "per_cell_min %.3f\n"
                "assembly_makespan_min %.3f\n"
                "last_cycling_start_min %.3f\n"
                "cycle_occupancy_days %g\n"
                "monthly_capacity_cells %d\n",
                n_cells, per_cell_s / 60.0, assembly_makespan_s / 60.0, last_cycling_start_s / 60.0,
                cycle_occupancy_days, monthly_capacity);
  return buf;
}

ThroughputReport throughput(const CampaignConfig& config) {
  config.validate();
  CampaignConfig c = config;
  c.assembly.p_fail = 0.0;
  c.assembly.max_retries = 0;

  std::vector<std::string> labels;
  auto jobs = build_jobs(c, labels);

  sched::Simulator sim;
  sched::CharacterizationStage stage(sim, c.channels);
  assembly::PlateInventory inventory;
  assembly::ResourceRegistry registry;
  Rng rng = Rng(*c.seed).substream("assembly");
  assembly::AssemblyLine line(c.assembly, inventory, registry, rng);
  ThroughputReport rep;
  line.start(sim, jobs, [&](const assembly::AssemblyResult& r) {
    rep.assembly_makespan_s = std::max(rep.assembly_makespan_s, r.finished_s);
    sched::CellWorkload w;
    w.cell_id = r.cell_id;
    w.segments.push_back({.cycling_s = c.cycle_occupancy_days * 86400.0});
    stage.submit(std::move(w), sim.now());
  });
  sim.run();
  for (const auto& e : sim.log().events())
    if (e.kind == sched::EventKind::cycling_start) rep.last_cycling_start_s = std::max(rep.last_cycling_start_s, e.timestamp_s);

  rep.n_cells = c.n_cells;
  rep.per_cell_s = c.assembly.per_cell_s;
  rep.cycle_occupancy_days = c.cycle_occupancy_days;
  rep.monthly_capacity = monthly_capacity(c.month_days, c.cycle_occupancy_days, c.channels.cycling_channels);
  return rep;
}

// ---------------------------------------------------------------------------
// Reports

std::vector<ReportingPoint> capacity_reporting_points(const std::map<int, cell::CyclingRecord>& records,
                                                      int main_index) {
  std::vector<double> formation, main;
  int formation_cycle = 0, main_cycle = 0;
  for (const auto& [id, rec] : records) {
    if (rec.rows.empty()) continue;
    std::size_t n_formation = 0;
    while (n_formation < rec.rows.size() && rec.rows[n_formation].c_rate == rec.rows.front().c_rate) ++n_formation;
    if (n_formation == rec.rows.size()) n_formation = 0;  // single-rate record: no formation block
    formation.push_back(rec.rows.front().discharge_mah);
    formation_cycle = rec.rows.front().cycle;
    const std::size_t k = n_formation + static_cast<std::size_t>(main_index) - 1;
    if (k < rec.rows.size()) {
      main.push_back(rec.rows[k].discharge_mah);
      main_cycle = rec.rows[k].cycle;
    }
  }
  std::vector<ReportingPoint> out;
  out.push_back({"formation cycle", formation_cycle, stats::summarize(formation), stats::histogram(formation)});
  if (main.size() >= 2) {
    std::string label = std::to_string(main_index);
    label += (main_index % 10 == 1 && main_index % 100 != 11)   ? "st"
             : (main_index % 10 == 2 && main_index % 100 != 12) ? "nd"
             : (main_index % 10 == 3 && main_index % 100 != 13) ? "rd"
                                                                : "th";
    out.push_back({label + " main cycle", main_cycle, stats::summarize(main), stats::histogram(main)});
  }
  return out;
}

std::string format_capacity_report(const std::vector<ReportingPoint>& points) {
  std::ostringstream os;
  char buf[160];
  for (const auto& p : points) {
    os << p.label << " (cycle " << p.cycle << ") discharge capacity\n";
    std::snprintf(buf, sizeof buf, "  n %zu\n  mean_mAh %.6f\n  std_mAh %.6f\n  rsd %s\n", p.summary.n,
                  p.summary.mean, p.summary.std, stats::format_percent(p.summary.rsd).c_str());
    os << buf << "  histogram\n";
    for (std::size_t i = 0; i < p.histogram.counts.size(); ++i) {
      const bool last = i + 1 == p.histogram.counts.size();
      std::snprintf(buf, sizeof buf, "    [%.6f, %.6f%c %zu\n", p.histogram.bin_edges[i],
                    p.histogram.bin_edges[i + 1], last ? ']' : ')', p.histogram.counts[i]);
      os << buf;
    }
  }
  return os.str();
}

std::string format_eis_report(const std::vector<io::FitRow>& rows) {
  std::map<int, std::vector<eis::FitResult>> by_trigger;
  for (const auto& r : rows) by_trigger[r.trigger].push_back(r.fit);

  std::ostringstream os;
  char buf[160];
  for (const auto& [trigger, fits] : by_trigger) {
    os << "eis trigger " << trigger << " fitted parameters\n";
    try {
      const auto s = stats::eis_param_stats(fits);
      os << "  converged " << s.used << " excluded " << s.excluded << "\n";
      for (std::size_t i = 0; i < s.params.size(); ++i) {
        std::snprintf(buf, sizeof buf, "  %-3s mean %.6g std %.6g rsd %s\n", stats::kEisParameterNames[i].c_str(),
                      s.params[i].mean, s.params[i].std, stats::format_percent(s.params[i].rsd).c_str());
        os << buf;
      }
    } catch (const TooFewConverged& e) {
      os << "  unavailable: " << e.what() << "\n";
    }
  }
  return os.str();
}

std::map<int, cell::CyclingRecord> load_cycling_records(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::path cells = dir;
  if (fs::is_directory(dir / "cells")) cells = dir / "cells";
  if (!fs::is_directory(cells)) throw ParseError("not a directory: " + dir.string());

  std::map<int, cell::CyclingRecord> out;
  for (const auto& entry : fs::directory_iterator(cells)) {
    if (!entry.is_directory()) continue;
    const auto file = entry.path() / "cycling.csv";
    if (!fs::exists(file)) continue;
    int id = 0;
    try {
      id = std::stoi(entry.path().filename().string());
    } catch (const std::exception&) {
      continue;
    }
    std::ifstream in(file);
    out[id] = io::read_cycling_csv(in, file.string());
  }
  return out;
}

}  // namespace celllab::campaign
