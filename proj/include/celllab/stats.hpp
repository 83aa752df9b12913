#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "celllab/eis.hpp"

namespace celllab::stats {

struct SampleSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) deviation
  double rsd = 0.0;  // std / mean, as a fraction
};

/// Throws TooFewSamples for n < 2 and ZeroMean when the mean is exactly 0.
SampleSummary summarize(std::span<const double> values);

struct Histogram {
  std::vector<double> bin_edges;  // counts.size() + 1 entries
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

/// ceil(log2 n) + 1
int sturges_bins(std::size_t n);

/// Equal-width bins over [min, max]; the last bin is closed on the right.
/// A zero-width range is widened by 0.5 on each side. Throws EmptyInput.
Histogram histogram(std::span<const double> values, std::optional<int> n_bins = std::nullopt);

struct GroupComparison {
  std::string label_a;
  std::string label_b;
  SampleSummary a;
  SampleSummary b;
  double rsd_difference = 0.0;  // b.rsd - a.rsd
};

GroupComparison compare_groups(std::span<const double> a, std::span<const double> b,
                               std::string label_a = "a", std::string label_b = "b");

inline const std::array<std::string, eis::CircuitParams::kParameterCount> kEisParameterNames = {
    "r1", "r2", "c2", "r3", "c3", "r4", "c4"};

struct EisParamStats {
  std::array<SampleSummary, eis::CircuitParams::kParameterCount> params{};
  std::size_t used = 0;
  std::size_t excluded = 0;

  const SampleSummary& by_name(const std::string& name) const;
};

/// Summaries over converged fits only. Throws TooFewConverged below two.
EisParamStats eis_param_stats(std::span<const eis::FitResult> fits);

/// 0.00955 -> "0.955%"
std::string format_percent(double fraction);

}  // namespace celllab::stats
