#include "celllab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "celllab/errors.hpp"

namespace celllab::stats {

SampleSummary summarize(std::span<const double> values) {
  if (values.size() < 2) throw TooFewSamples("need at least two samples, got " + std::to_string(values.size()));
  // Welford
  double mean = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (double x : values) {
    ++k;
    const double d = x - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (x - mean);
  }
  SampleSummary s;
  s.n = values.size();
  s.mean = mean;
  s.std = std::sqrt(std::max(m2, 0.0) / static_cast<double>(s.n - 1));
  if (mean == 0.0) throw ZeroMean("relative standard deviation undefined for zero mean");
  s.rsd = s.std / mean;
  return s;
}

std::size_t Histogram::total() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

int sturges_bins(std::size_t n) {
  if (n <= 1) return 1;
  return static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))) + 1;
}

Histogram histogram(std::span<const double> values, std::optional<int> n_bins) {
  if (values.empty()) throw EmptyInput("histogram of an empty sample");
  const int bins = n_bins.value_or(sturges_bins(values.size()));
  if (bins < 1) throw EmptyInput("histogram needs at least one bin");

  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;

  Histogram h;
  h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.bin_edges[static_cast<std::size_t>(i)] = lo + width * i;
  h.bin_edges.back() = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);

  for (double x : values) {
    auto idx = static_cast<long>(std::floor((x - lo) / width));
    idx = std::clamp(idx, 0L, static_cast<long>(bins) - 1);
    // Floating division can land one bin off near an edge.
    while (idx > 0 && x < h.bin_edges[static_cast<std::size_t>(idx)]) --idx;
    while (idx + 1 < bins && x >= h.bin_edges[static_cast<std::size_t>(idx) + 1]) ++idx;
    ++h.counts[static_cast<std::size_t>(idx)];
  }
  return h;
}

GroupComparison compare_groups(std::span<const double> a, std::span<const double> b, std::string label_a,
                               std::string label_b) {
  GroupComparison c;
  c.label_a = std::move(label_a);
  c.label_b = std::move(label_b);
  c.a = summarize(a);
  c.b = summarize(b);
  c.rsd_difference = c.b.rsd - c.a.rsd;
  return c;
}

const SampleSummary& EisParamStats::by_name(const std::string& name) const {
  for (std::size_t i = 0; i < kEisParameterNames.size(); ++i)
    if (kEisParameterNames[i] == name) return params[i];
  throw std::out_of_range("unknown EIS parameter " + name);
}

EisParamStats eis_param_stats(std::span<const eis::FitResult> fits) {
  constexpr auto kP = static_cast<std::size_t>(eis::CircuitParams::kParameterCount);
  std::array<std::vector<double>, kP> columns;
  EisParamStats out;
  for (const auto& f : fits) {
    if (!f.converged) {
      ++out.excluded;
      continue;
    }
    const auto v = f.params.to_array();
    for (std::size_t i = 0; i < kP; ++i) columns[i].push_back(v[i]);
    ++out.used;
  }
  if (out.used < 2)
    throw TooFewConverged("need at least two converged fits, got " + std::to_string(out.used));
  for (std::size_t i = 0; i < kP; ++i) out.params[i] = summarize(columns[i]);
  return out;
}

std::string format_percent(double fraction) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f%%", fraction * 100.0);
  return buf;
}

}  // namespace celllab::stats
