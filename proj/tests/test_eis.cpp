#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "celllab/eis.hpp"
#include "celllab/errors.hpp"
#include "oracles.hpp"

using namespace celllab;
using namespace celllab::eis;

namespace {

constexpr double kPi = 3.14159265358979323846;

CircuitParams single_arc(double r1, double r, double c) {
  CircuitParams p;
  p.r1 = r1;
  p.arcs = {Arc{r, c}, Arc{1e-9, 1e-12}, Arc{1e-9, 1e-12}};
  return p;
}

}  // namespace

TEST_CASE("impedance limits and apex") {
  const auto p = CircuitParams::defaults();
  CHECK(std::abs(impedance(p, 1e12) - std::complex<double>(p.r1)) <= 1e-6 * p.r1);
  CHECK(std::abs(impedance(p, 1e-9) - std::complex<double>(p.total_resistance())) <= 1e-6 * p.total_resistance());

  CircuitParams one;
  one.r1 = 5.0;
  one.arcs = {Arc{10.0, 1e-4}, Arc{0.0, 1.0}, Arc{0.0, 1.0}};
  const double f = 1.0 / (2 * kPi * 10.0 * 1e-4);
  const auto z = impedance(one, f);
  CHECK(z.real() == doctest::Approx(10.0));
  CHECK(z.imag() == doctest::Approx(-5.0));
  CHECK_THROWS_AS(impedance(p, 0.0), NonPositiveFrequency);
}

TEST_CASE("impedance agrees with a term-by-term evaluation") {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    CircuitParams p;
    p.r1 = rng.uniform(1, 20);
    for (auto& a : p.arcs) a = Arc{rng.uniform(1, 50), std::pow(10.0, rng.uniform(-7, -2))};
    for (double f : frequency_grid()) {
      const auto a = impedance(p, f), b = testing::naive_impedance(p, f);
      CHECK(std::abs(a - b) <= 1e-12 * std::abs(b));
    }
  }
}

TEST_CASE("capacitive sanity: im <= 0, re non-increasing in frequency") {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    CircuitParams p;
    p.r1 = rng.uniform(0.1, 20);
    for (auto& a : p.arcs) a = Arc{rng.uniform(0.1, 80), std::pow(10.0, rng.uniform(-8, 0))};
    for (double f : frequency_grid(20)) CHECK(impedance(p, f).imag() <= 0.0);
    // grid is descending, so re must be non-decreasing along it
    const auto g = frequency_grid(20);
    for (std::size_t j = 1; j < g.size(); ++j) CHECK(impedance(p, g[j]).real() >= impedance(p, g[j - 1]).real() - 1e-12);
  }
}

TEST_CASE("default grid") {
  const auto g = frequency_grid();
  REQUIRE(g.size() == 64);
  CHECK(g.front() == 2e5);
  CHECK(g.back() == 0.1);
  for (std::size_t i = 1; i < g.size(); ++i) {
    CHECK(g[i] < g[i - 1]);
    CHECK(std::log10(g[i - 1] / g[i]) == doctest::Approx(std::log10(2e6) / 63.0));
  }
}

TEST_CASE("synthesis noise") {
  const auto p = CircuitParams::defaults();
  const auto g = frequency_grid();
  Rng rng(1);
  const auto clean = synthesize_spectrum(p, g, 0.0, rng);
  for (std::size_t j = 0; j < g.size(); ++j) CHECK(clean.points[j].z() == impedance(p, g[j]));
  CHECK_NOTHROW(clean.validate());

  double sum = 0;
  int n = 0;
  for (int k = 0; k < 20; ++k) {
    const auto noisy = synthesize_spectrum(p, g, 0.01, rng);
    for (std::size_t j = 0; j < g.size(); ++j, ++n) sum += std::abs(noisy.points[j].z() - impedance(p, g[j])) / std::abs(impedance(p, g[j]));
  }
  CHECK(sum / n == doctest::Approx(0.01).epsilon(0.02));
}

TEST_CASE("spectrum validation") {
  Spectrum s;
  s.points = {{10.0, 1, -1}, {10.0, 1, -1}};
  CHECK_THROWS_AS(s.validate(), InvalidSpectrum);
  s.points = {{3e5, 1, -1}, {1.0, 1, -1}};
  CHECK_THROWS_AS(s.validate(), InvalidSpectrum);
  s.points = {{1e3, 1, std::nan("")}, {1.0, 1, -1}};
  CHECK_THROWS_AS(s.validate(), InvalidSpectrum);
}

TEST_CASE("initial guess") {
  const auto g = frequency_grid();
  Rng rng(1);
  const auto p = single_arc(7.0, 30.0, 1e-4);
  const auto s = synthesize_spectrum(p, g, 0.0, rng);
  CHECK(initial_guess(s).r1 == doctest::Approx(7.0).epsilon(0.05));

  CircuitParams resistor;
  resistor.r1 = 12.0;
  resistor.arcs = {Arc{1e-12, 1e-6}, Arc{1e-12, 1e-6}, Arc{1e-12, 1e-6}};
  const auto guess = initial_guess(synthesize_spectrum(resistor, g, 0.0, rng));
  for (const auto& a : guess.arcs) CHECK(a.r < 1e-6);

  auto reversed = s;
  std::reverse(reversed.points.begin(), reversed.points.end());
  CHECK(initial_guess(reversed).r1 == doctest::Approx(initial_guess(s).r1));

  Spectrum few;
  few.points.assign(s.points.begin(), s.points.begin() + 5);
  CHECK_THROWS_AS(initial_guess(few), InsufficientData);
  Spectrum narrow;
  for (double f = 1000; f > 10; f /= 1.5) narrow.points.push_back({f, 1, -1});
  CHECK_THROWS_AS(initial_guess(narrow), InsufficientData);
}

TEST_CASE("jacobian: series column and finite differences") {
  const auto g = frequency_grid();
  const auto p = CircuitParams::defaults();
  const auto J = jacobian(p, g);
  const auto F = testing::fd_jacobian(p, g);
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK(J(2 * j, 0) == p.r1);
    CHECK(J(2 * j + 1, 0) == 0.0);
  }
  double worst = 0;
  for (std::size_t i = 0; i < F.size(); ++i)
    for (std::size_t k = 0; k < F[i].size(); ++k) {
      const double scale = std::max(std::abs(F[i][k]), std::abs(impedance(p, g[i / 2])));
      worst = std::max(worst, std::abs(J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) - F[i][k]) / scale);
    }
  CHECK(worst < 1e-6);
}

TEST_CASE("jacobian: vanishing capacitance behaves like a resistor") {
  CircuitParams p = CircuitParams::defaults();
  p.arcs[0].c = 1e-20;
  const auto J = jacobian(p, frequency_grid());
  for (Eigen::Index j = 0; j < J.rows(); j += 2) {
    CHECK(J(j, 1) == doctest::Approx(p.arcs[0].r));
    CHECK(std::abs(J(j, 2)) < 1e-9);
  }
}

TEST_CASE("fit round-trip on a clean spectrum") {
  const auto p = CircuitParams::defaults();
  Rng rng(1);
  const auto s = synthesize_spectrum(p, frequency_grid(), 0.0, rng);
  const auto r = fit(s);
  CHECK(r.converged);
  CHECK_FALSE(r.ill_conditioned);
  const auto a = r.params.to_array(), b = p.canonical().to_array();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-3 * b[i]);
  CHECK(r.residual_norm < 1e-6);

  // idempotence
  const auto again = fit(synthesize_spectrum(r.params, frequency_grid(), 0.0, rng));
  const auto c = again.params.to_array();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(c[i] == doctest::Approx(a[i]).epsilon(1e-6));
}

TEST_CASE("fit scales with the resistances") {
  auto p = CircuitParams::defaults();
  Rng rng(3);
  const auto g = frequency_grid();
  const auto noisy = synthesize_spectrum(p, g, 0.01, rng);
  auto scaled = noisy;
  const double lambda = 3.0;
  for (auto& pt : scaled.points) {
    pt.re_ohm *= lambda;
    pt.im_ohm *= lambda;
  }
  const auto a = fit(noisy), b = fit(scaled);
  CHECK(b.residual_norm == doctest::Approx(lambda * a.residual_norm).epsilon(1e-4));
  CHECK(b.params.r1 == doctest::Approx(lambda * a.params.r1).epsilon(1e-4));
  for (std::size_t k = 0; k < 3; ++k) CHECK(b.params.arcs[k].r == doctest::Approx(lambda * a.params.arcs[k].r).epsilon(1e-4));
}

TEST_CASE("close time constants are flagged") {
  CircuitParams p;
  p.r1 = 5;
  p.arcs = {Arc{10, 1e-5}, Arc{10, 1.5e-5}, Arc{30, 1e-2}};
  Rng rng(1);
  const auto r = fit(synthesize_spectrum(p, frequency_grid(), 0.0, rng), p);
  CHECK(r.ill_conditioned);
}

TEST_CASE("degenerate spectrum") {
  Spectrum s;
  for (double f : frequency_grid()) s.points.push_back({f, 5.0, 0.0});
  CHECK_THROWS_AS(fit(s, CircuitParams::defaults()), DegenerateSpectrum);
}

TEST_CASE("canonical order and parameter arrays") {
  CircuitParams p;
  p.r1 = 1;
  p.arcs = {Arc{1, 1}, Arc{1, 1e-3}, Arc{1, 1e-6}};
  const auto c = p.canonical();
  CHECK(c.arcs[0].c == 1e-6);
  CHECK(c.arcs[2].c == 1);
  CHECK(CircuitParams::from_array(p.to_array()).to_array() == p.to_array());
  CircuitParams bad = p;
  bad.arcs[1].r = -1;
  CHECK_THROWS(bad.validate());
}
