#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "celllab/assembly.hpp"
#include "celllab/cellmodel.hpp"
#include "celllab/csv_io.hpp"
#include "celllab/formulation.hpp"
#include "celllab/scheduler.hpp"
#include "celllab/stats.hpp"

namespace celllab::campaign {

struct RecipeGroup {
  std::string label;
  formulation::ElectrolyteRecipe recipe;
  int replicates = 0;
};

struct ProtocolChoice {
  std::string name = "reproducibility";  // or "eis-rate"
  int formation_cycles = 2;
  int main_cycles = 50;
  int cycles_per_rate = 2;
  double rest_s = 1800.0;

  cell::Protocol build() const;
};

struct CampaignConfig {
  std::string name = "campaign";
  std::optional<std::uint64_t> seed;
  int n_cells = 0;
  std::vector<RecipeGroup> recipes;
  std::vector<formulation::StockSolution> stocks;
  ProtocolChoice protocol;
  formulation::FormulationSettings formulation = formulation::FormulationSettings::defaults();
  assembly::AssemblyConfig assembly;
  sched::ChannelConfig channels;
  cell::CellParameters cell;
  cell::PopulationNoise noise;
  cell::SimSettings sim;
  double eis_noise_rel = 0.005;
  double eis_points_per_decade = 10.0;
  double cycle_occupancy_days = 6.0;
  double month_days = 30.0;
  std::string output_dir = "out";

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Strict reader: unknown keys and wrong types are ConfigErrors.
  static CampaignConfig from_json(const nlohmann::json& j);
  static CampaignConfig load(const std::filesystem::path& path);
};

/// 2 M LiPF6 in EC:EMC 3:7, unheated.
std::vector<formulation::StockSolution> default_stocks();

/// Cycling time between EIS triggers, as the scheduler consumes it.
sched::CellWorkload workload_from_run(int cell_id, const cell::ProtocolRun& run);

struct CellOutcome {
  int cell_id = -1;
  std::string recipe;
  int attempts = 0;
  bool assembled = false;
  cell::ProtocolRun run;
};

struct CampaignResult {
  std::filesystem::path root;
  std::filesystem::path events;
  std::filesystem::path fits;
  std::filesystem::path stats;
  std::vector<std::filesystem::path> cycling;
  std::vector<std::filesystem::path> spectra;
  std::vector<CellOutcome> cells;
  std::vector<io::FitRow> fit_rows;
  std::size_t failed_assemblies = 0;
  double makespan_s = 0.0;
};

/// Formulation, assembly, scheduling, cycling, EIS, fitting and reports,
/// written under out_root/<name>/.
CampaignResult run_campaign(const CampaignConfig& config, const std::filesystem::path& out_root);

struct ThroughputReport {
  int n_cells = 0;
  double assembly_makespan_s = 0.0;
  double last_cycling_start_s = 0.0;
  double per_cell_s = 0.0;
  double cycle_occupancy_days = 0.0;
  int monthly_capacity = 0;

  std::string to_text() const;
};

/// Failure-free assembly of n cells followed by channel admission.
ThroughputReport throughput(const CampaignConfig& config);

/// floor(month_days / occupancy_days) * channels
int monthly_capacity(double month_days, double occupancy_days, int channels);

struct ReportingPoint {
  std::string label;
  int cycle = 0;
  stats::SampleSummary summary;
  stats::Histogram histogram;
};

/// Formation cycle and the `main_index`-th main cycle. Formation rows are
/// the leading rows sharing the first row's C-rate. Cells missing a
/// reporting cycle are left out of that point. Throws TooFewSamples.
std::vector<ReportingPoint> capacity_reporting_points(const std::map<int, cell::CyclingRecord>& records,
                                                      int main_index = 50);

std::string format_capacity_report(const std::vector<ReportingPoint>& points);
std::string format_eis_report(const std::vector<io::FitRow>& rows);

/// Reads every cells/<id>/cycling.csv below `dir` (a campaign directory or
/// its cells/ directory).
std::map<int, cell::CyclingRecord> load_cycling_records(const std::filesystem::path& dir);

}  // namespace celllab::campaign
