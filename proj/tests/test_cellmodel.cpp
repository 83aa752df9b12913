#include <doctest.h>

#include <cmath>

#include "celllab/cellmodel.hpp"
#include "celllab/errors.hpp"
#include "oracles.hpp"

using namespace celllab;
using namespace celllab::cell;

namespace {

CellParameters ideal() {
  CellParameters p;
  p.r_internal_ohm = 0.0;
  p.fade_per_cycle = 0.0;
  p.rate_exponent = 0.0;
  return p;
}

}  // namespace

TEST_CASE("OCV table interpolation") {
  const auto ocv = OcvTable::default_table();
  CHECK(ocv(0.0) == 3.0);
  CHECK(ocv(1.0) == 4.3);
  CHECK(ocv(0.125) == doctest::Approx((3.0 + 3.6) / 2));
  CHECK(ocv(0.875) == doctest::Approx((4.0 + 4.3) / 2));
  CHECK_THROWS_AS(ocv(-0.01), OutOfRange);
  CHECK_THROWS_AS(ocv(1.01), OutOfRange);
  for (double s = 0.0; s <= 1.0; s += 0.01) CHECK(ocv.inverse(ocv(s)) == doctest::Approx(s));
  CHECK_THROWS_AS(OcvTable({0, 0.5, 1}, {3, 3, 4}), InvalidCellParameters);
}

TEST_CASE("zero-resistance 1C charge from empty takes exactly one hour") {
  const auto p = ideal();
  const auto out = simulate_step(p, {}, ProtocolStep::cc_charge(1.0, 4.3));
  CHECK(out.elapsed_s == 3600.0);
  CHECK(out.state.soc == 1.0);
  CHECK(out.hit_limit);
}

TEST_CASE("CC terminal voltage follows Ohm's law") {
  CellParameters p = ideal();
  p.q_nominal_mah = 200.0;  // 1C = 0.2 A
  p.r_internal_ohm = 0.05;
  SimSettings s;
  s.record_samples = true;
  s.sample_every_s = 30.0;
  const auto out = simulate_step(p, {}, ProtocolStep::cc_charge(1.0, 4.2), s);
  REQUIRE(out.samples.size() > 10);
  for (const auto& x : out.samples) {
    CHECK(x.current_a == doctest::Approx(0.2));
    CHECK(x.voltage - p.ocv(x.soc) == doctest::Approx(0.01).epsilon(1e-9));
  }
  CHECK(out.samples.back().voltage == doctest::Approx(4.2));
}

TEST_CASE("rest changes only the clock") {
  CellState st{0.4, 100.0, 3};
  const auto out = simulate_step(CellParameters{}, st, ProtocolStep::rest(1800.0));
  CHECK(out.state.soc == 0.4);
  CHECK(out.state.completed_cycles == 3);
  CHECK(out.state.time_s == 1900.0);
  CHECK(out.charge_mah == 0.0);
}

TEST_CASE("charge conservation per step") {
  CellParameters p;
  CellState st;
  for (const auto& step : {ProtocolStep::cc_charge(0.1, 4.3), ProtocolStep::cv_hold(4.3, 0.1),
                           ProtocolStep::cc_discharge(0.1, 3.0), ProtocolStep::cc_charge(2.0, 4.2),
                           ProtocolStep::cc_discharge(3.0, 3.0)}) {
    const auto out = simulate_step(p, st, step);
    const double dq = (out.state.soc - st.soc) * out.capacity_scale_mah;
    CHECK(std::abs(out.charge_mah - dq) <= 1e-9 * std::abs(dq));
    st = out.state;
  }
}

TEST_CASE("CV hold ends at the cutoff current") {
  CellParameters p;
  auto cc = simulate_step(p, {}, ProtocolStep::cc_charge(0.1, 4.3));
  SimSettings s;
  s.record_samples = true;
  auto cv = simulate_step(p, cc.state, ProtocolStep::cv_hold(4.3, 0.1, 0.05), s);
  CHECK(cv.elapsed_s > 0.0);
  REQUIRE(!cv.samples.empty());
  CHECK(cv.samples.back().current_a * 1000.0 == doctest::Approx(0.05 * p.q_nominal_mah));
  for (std::size_t i = 1; i < cv.samples.size(); ++i) CHECK(cv.samples[i].current_a <= cv.samples[i - 1].current_a);
  for (const auto& x : cv.samples) CHECK(x.voltage == 4.3);
}

TEST_CASE("step exceeding the maximum duration is nonconvergent") {
  CellParameters p;
  SimSettings s;
  s.max_step_s = 600.0;
  CHECK_THROWS_AS(simulate_step(p, {}, ProtocolStep::cc_charge(0.1, 4.3), s), NonconvergentStep);
}

TEST_CASE("reproducibility protocol gives 52 rows") {
  const auto run = run_protocol(CellParameters{}, reproducibility_protocol());
  REQUIRE(run.record.rows.size() == 52);
  CHECK(run.record.rows[0].c_rate == 0.1);
  CHECK(run.record.rows[51].c_rate == 1.0);
  CHECK(run.triggers.empty());
  for (const auto& r : run.record.rows) {
    CHECK(r.charge_mah >= 0.0);
    CHECK(r.discharge_mah >= 0.0);
    CHECK(r.ce == doctest::Approx(r.discharge_mah / r.charge_mah));
  }
  // fade: non-increasing discharge at fixed rate
  for (std::size_t i = 3; i < 52; ++i) CHECK(run.record.rows[i].discharge_mah <= run.record.rows[i - 1].discharge_mah + 1e-12);
}

TEST_CASE("without fade the main cycles are identical") {
  CellParameters p;
  p.fade_per_cycle = 0.0;
  const auto run = run_protocol(p, reproducibility_protocol());
  for (std::size_t i = 3; i < 52; ++i)
    CHECK(run.record.rows[i].discharge_mah == doctest::Approx(run.record.rows[2].discharge_mah).epsilon(1e-12));
}

TEST_CASE("eis-rate protocol: four triggers, rate ordering, rest before each") {
  CellParameters p;
  const auto run = run_protocol(p, eis_rate_protocol());
  REQUIRE(run.triggers.size() == 4);
  const double rates[] = {0.5, 1.0, 2.0, 3.0};
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(run.triggers[k].c_rate == rates[k]);
    CHECK(run.triggers[k].ready_s - run.triggers[k].complete_s == 1800.0);
    CHECK(run.triggers[k].cycle == 2 + 2 * static_cast<int>(k + 1));
  }
  CHECK(run.record.rows.size() == 10);
  // discharge capacity falls with rate (second cycle of each block)
  for (std::size_t k = 1; k < 4; ++k)
    CHECK(run.record.rows[3 + 2 * k].discharge_mah < run.record.rows[3 + 2 * (k - 1)].discharge_mah);
  CHECK(run.triggers[3].circuit.r1 > run.triggers[0].circuit.r1);
}

TEST_CASE("terminal voltage stays inside the protocol window") {
  SimSettings s;
  s.record_samples = true;
  s.sample_every_s = 10.0;
  const auto proto = eis_rate_protocol();
  const auto [lo, hi] = proto.voltage_window();
  const auto run = run_protocol(CellParameters{}, proto, s);
  REQUIRE(!run.record.trace.empty());
  for (const auto& x : run.record.trace) {
    CHECK(x.voltage >= lo - 1e-3);
    CHECK(x.voltage <= hi + 1e-3);
  }
}

TEST_CASE("protocol validation") {
  Protocol p;
  CHECK_THROWS_AS(p.validate(), InvalidProtocol);
  p.steps = {ProtocolStep::cc_charge(1.0, 3.0), ProtocolStep::cc_discharge(1.0, 4.0)};
  CHECK_THROWS_AS(p.validate(), InvalidProtocol);
  p.steps = {ProtocolStep::cc_charge(0.0, 4.2)};
  CHECK_THROWS_AS(p.validate(), InvalidProtocol);
  auto r = ProtocolStep::rest(10);
  r.repeat = 0;
  p.steps = {r};
  CHECK_THROWS_AS(p.validate(), InvalidProtocol);
  CHECK_NOTHROW(reproducibility_protocol().validate());
}

TEST_CASE("population sampling") {
  Rng rng(1);
  auto same = sample_population(CellParameters{}, {0.0, 0.0}, 5, rng);
  for (const auto& c : same) {
    CHECK(c.q_nominal_mah == 3.5);
    CHECK(c.circuit.r1 == CellParameters{}.circuit.r1);
  }

  Rng r2(2);
  const auto pop = sample_population(CellParameters{}, {}, 4000, r2);
  std::vector<double> q, r3;
  for (const auto& c : pop) {
    q.push_back(c.q_nominal_mah);
    r3.push_back(c.circuit.arcs[1].r);
    CHECK(c.circuit.r1 > 0.0);
  }
  double m, s;
  testing::two_pass(q, m, s);
  CHECK(s / m == doctest::Approx(0.0104).epsilon(0.0005 / 0.0104));
  testing::two_pass(r3, m, s);
  CHECK(std::abs(s - 2.5) < 0.1);

  Rng a(5), b(5);
  auto pa = sample_population(CellParameters{}, {}, 10, a);
  auto pb = sample_population(CellParameters{}, {}, 10, b);
  for (int i = 0; i < 10; ++i) CHECK(pa[i].q_nominal_mah == pb[i].q_nominal_mah);
}

TEST_CASE("runs are deterministic") {
  const auto a = run_protocol(CellParameters{}, reproducibility_protocol(2, 5));
  const auto b = run_protocol(CellParameters{}, reproducibility_protocol(2, 5));
  REQUIRE(a.record.rows.size() == b.record.rows.size());
  for (std::size_t i = 0; i < a.record.rows.size(); ++i) CHECK(a.record.rows[i].discharge_mah == b.record.rows[i].discharge_mah);
}
