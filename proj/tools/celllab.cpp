// celllab: command-line entry points for the coin-cell lab simulator.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "celllab/campaign.hpp"
#include "celllab/errors.hpp"

namespace fs = std::filesystem;
using namespace celllab;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kConfigFailure = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

campaign::CampaignConfig load_config(const Common& c) {
  if (c.config.empty()) throw ConfigError("config", "--config is required");
  auto cfg = campaign::CampaignConfig::load(c.config);
  if (c.seed) cfg.seed = c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

int cmd_simulate(const Common& c) {
  const auto cfg = load_config(c);
  const auto res = campaign::run_campaign(cfg, cfg.output_dir);
  if (!c.quiet) {
    std::cout << "wrote " << res.root.string() << "\n"
              << "  cells assembled " << res.cycling.size() << " of " << cfg.n_cells << " ("
              << res.failed_assemblies << " failed assemblies)\n"
              << "  spectra " << res.spectra.size() << ", fits " << res.fit_rows.size() << "\n";
    std::cout << io::read_file(res.stats);
  }
  return kOk;
}

int cmd_throughput(const Common& c) {
  const auto cfg = load_config(c);
  const auto rep = campaign::throughput(cfg);
  std::cout << rep.to_text();
  return kOk;
}

int cmd_fit_eis(const Common& c, const std::vector<std::string>& files) {
  std::vector<io::FitRow> rows;
  int bad = 0;
  std::ostringstream table;
  io::write_fits_header(table);
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      std::ifstream in(files[i]);
      if (!in) throw ParseError("cannot open " + files[i]);
      const auto spectrum = io::read_spectrum_csv(in, files[i]);
      io::FitRow row{static_cast<int>(i), 0, eis::fit(spectrum)};
      io::write_fit_row(table, row);
      rows.push_back(std::move(row));
    } catch (const Error& e) {
      ++bad;
      std::cerr << "error: " << e.what() << "\n";
    }
  }
  std::cout << table.str();
  if (!c.quiet && rows.size() >= 2) std::cout << "\n" << campaign::format_eis_report(rows);
  return bad ? kRuntimeFailure : kOk;
}

int cmd_stats(const Common&, const std::string& dir) {
  const auto records = campaign::load_cycling_records(dir);
  std::cout << campaign::format_capacity_report(campaign::capacity_reporting_points(records));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coin-cell lab pipeline simulator"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "campaign configuration (JSON)");
    sub->add_option("--seed", common.seed, "override the configured seed");
    sub->add_option("--out", common.out, "output root directory");
    sub->add_flag("--quiet", common.quiet, "print less");
  };

  auto* simulate = app.add_subcommand("simulate", "run a campaign end to end");
  add_common(simulate);
  auto* through = app.add_subcommand("throughput", "assembly makespan and monthly capacity");
  add_common(through);
  std::vector<std::string> spectra;
  auto* fit_eis = app.add_subcommand("fit-eis", "fit spectrum CSV files");
  add_common(fit_eis);
  fit_eis->add_option("files", spectra, "spectrum CSV files")->required();
  std::string records_dir;
  auto* stats = app.add_subcommand("stats", "capacity statistics over cycling records");
  add_common(stats);
  stats->add_option("dir", records_dir, "campaign or cells directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (*simulate) return cmd_simulate(common);
    if (*through) return cmd_throughput(common);
    if (*fit_eis) return cmd_fit_eis(common, spectra);
    if (*stats) return cmd_stats(common, records_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kRuntimeFailure;
}
