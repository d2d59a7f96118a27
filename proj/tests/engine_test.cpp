#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qtherm/engine.hpp"
#include "qtherm/protocol_io.hpp"

using namespace qtherm;

namespace {

const double kLn2 = std::log(2.0);

double h2(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
}

// AVG row for a given (cycle, step), 1-based.
const LedgerRow& avg_row(const Ledger& ledger, int cycle, int step) {
  for (const auto& r : ledger.rows)
    if (r.cycle == cycle && r.step_id == step && r.branch == "AVG") return r;
  REQUIRE(false);
  return ledger.rows.front();
}

bool protocols_equal(const Protocol& a, const Protocol& b) {
  return a.name == b.name && a.layout == b.layout && a.steps == b.steps &&
         a.config == b.config;
}

}  // namespace

TEST_CASE("protocol validation") {
  Protocol p = builtin_hs_cycle();
  CHECK_NOTHROW(validate_protocol(p));

  SUBCASE("Prepare must come first and only first") {
    Protocol q = p;
    std::swap(q.steps[0], q.steps[1]);
    CHECK_THROWS_AS(validate_protocol(q), Error);
    Protocol r = p;
    r.steps.push_back(r.steps.front());
    CHECK_THROWS_AS(validate_protocol(r), Error);
  }
  SUBCASE("unknown labels are rejected") {
    Protocol q = p;
    q.steps[1].target = "ghost";
    CHECK_THROWS_AS(validate_protocol(q), Error);
  }
  SUBCASE("config sanity") {
    Protocol q = p;
    q.config.cycles = -1;
    CHECK_THROWS_AS(validate_protocol(q), Error);
    q = p;
    q.config.temperature = 0.0;
    CHECK_THROWS_AS(validate_protocol(q), Error);
  }
}

TEST_CASE("empty protocol runs to an empty, trivially closed ledger") {
  Protocol p;
  p.name = "empty";
  p.layout = SystemLayout({{"spin", Role::spin, 2, {"+z", "-z"}}});
  CHECK_NOTHROW(validate_protocol(p));
  RunResult r = run(p);
  CHECK(r.ledger.rows.empty());
  ClosureVerdict v = cycle_closure(r);
  CHECK(v.closed);
}

TEST_CASE("hs cycle, collapse mode, one cycle") {
  Protocol p = builtin_hs_cycle();
  RunResult r = run(p);

  SUBCASE("entropy rises by ln 2 at the spin measurement") {
    CHECK(std::abs(avg_row(r.ledger, 1, 1).s_vn_system) < 1e-9);
    CHECK(std::abs(avg_row(r.ledger, 1, 2).s_vn_system - kLn2) < 1e-9);
  }
  SUBCASE("joint entropy is constant from the spin measurement through the location measurement") {
    for (int step = 2; step <= 4; ++step)
      CHECK(std::abs(avg_row(r.ledger, 1, step).s_vn_joint - kLn2) < 1e-9);
  }
  SUBCASE("the location record removes the classical conditional entropy") {
    CHECK(std::abs(avg_row(r.ledger, 1, 3).h_cond_classical - kLn2) < 1e-9);
    CHECK(std::abs(avg_row(r.ledger, 1, 4).h_cond_classical) < 1e-9);
  }
  SUBCASE("branch probabilities stay normalized") {
    for (int step = 1; step <= 8; ++step) {
      double total = 0.0;
      for (const auto& row : r.ledger.rows)
        if (row.cycle == 1 && row.step_id == step && row.branch != "AVG")
          total += row.probability;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
  SUBCASE("cycle is closed; the reset pays ln 2 into the bath") {
    ClosureVerdict v = cycle_closure(r);
    CHECK(v.closed);
    CHECK(std::abs(r.ledger.total_work + kLn2) < 1e-9);  // work spent on erasure
    CHECK(std::abs(r.bath.cumulative_entropy - kLn2) < 1e-9);
    // The location record is redundant with the spin record: erasing it is free.
    CHECK(std::abs(avg_row(r.ledger, 1, 7).ds_bath) < 1e-9);
    CHECK(std::abs(avg_row(r.ledger, 1, 8).ds_bath - kLn2) < 1e-9);
  }
  SUBCASE("audit is clean") {
    AuditReport a = audit(r, p);
    CHECK(a.clean());
    CHECK(!a.kelvin_planck_violation);
  }
}

TEST_CASE("hs cycle mode equivalence at the joint level") {
  Protocol pc = builtin_hs_cycle();
  Protocol pn = builtin_hs_cycle();
  pn.config.mode = Mode::no_collapse;
  RunResult rc = run(pc), rn = run(pn);
  auto ac = rc.ledger.avg_rows();
  auto an = rn.ledger.avg_rows();
  REQUIRE(ac.size() == an.size());
  for (size_t i = 0; i < ac.size(); ++i)
    CHECK(std::abs(ac[i]->s_vn_joint - an[i]->s_vn_joint) < 1e-9);
}

TEST_CASE("hs cycle with a deterministic spin preparation has zero entropy flow") {
  Protocol p = builtin_hs_cycle();
  FactorPrep up;
  up.kind = FactorPrep::Kind::pointer;
  up.pointer_name = "+z";
  p.steps[0].preparation["spin"] = up;
  RunResult r = run(p);
  for (const auto& row : r.ledger.rows) {
    CHECK(std::abs(row.s_vn_system) < 1e-9);
    CHECK(std::abs(row.s_vn_joint) < 1e-9);
    CHECK(std::abs(row.ds_bath) < 1e-9);
    CHECK(std::abs(row.work) < 1e-9);
    CHECK(std::abs(row.s_total_running) < 1e-9);
  }
}

TEST_CASE("hs cycle with an unpermitted unitary reset attempt fails") {
  Protocol p = builtin_hs_cycle(ResetKind::unitary_attempt);
  CHECK_THROWS_AS(run(p), Error);
}

TEST_CASE("record-conditioned variant matches the standard hs ledger totals") {
  RunResult standard = run(builtin_hs_cycle());
  RunResult variant = run(builtin_hs_cycle_record_conditioned());
  CHECK(std::abs(standard.ledger.total_work - variant.ledger.total_work) < 1e-9);
  CHECK(std::abs(standard.ledger.total_heat - variant.ledger.total_heat) < 1e-9);
  CHECK(std::abs(standard.ledger.total_ds_bath - variant.ledger.total_ds_bath) < 1e-9);
  CHECK(std::abs(standard.ledger.rows.back().s_total_running -
                 variant.ledger.rows.back().s_total_running) < 1e-9);
  CHECK(cycle_closure(variant).closed);
}

TEST_CASE("von Neumann gas cycle") {
  SUBCASE("half-half weights, one particle") {
    Protocol p = builtin_von_neumann_cycle(1.0, 0.5);
    RunResult r = run(p);
    // Gas entropy before compression (after separation) is ln 2.
    CHECK(std::abs(avg_row(r.ledger, 1, 4).s_vn_system - kLn2) < 1e-9);
    CHECK(std::abs(r.bath.cumulative_entropy - kLn2) < 1e-9);
    CHECK(cycle_closure(r).closed);
    AuditReport a = audit(r, p);
    CHECK(a.clean());
    // Total entropy change between the post-measurement stage and the end is
    // zero: the only production is the measurement itself.
    CHECK(std::abs(r.ledger.rows.back().s_total_running -
                   avg_row(r.ledger, 1, 3).s_total_running) < 1e-9);
  }

  SUBCASE("deterministic weights give a zero-entropy cycle") {
    Protocol p = builtin_von_neumann_cycle(1.0, 1.0);
    RunResult r = run(p);
    for (const auto& row : r.ledger.rows) {
      CHECK(std::abs(row.s_vn_system) < 1e-9);
      CHECK(std::abs(row.ds_bath) < 1e-9);
      CHECK(std::abs(row.work) < 1e-9);
    }
  }

  SUBCASE("bath gain matches the weighted-compression formula") {
    Protocol p = builtin_von_neumann_cycle(10.0, 0.64);
    RunResult r = run(p);
    const double expect = 10.0 * h2(0.64);
    CHECK(std::abs(r.bath.cumulative_entropy - expect) < 1e-9);
    CHECK(cycle_closure(r).closed);
  }

  SUBCASE("per-particle ledger quantities are independent of N") {
    const double w = 0.7;
    Protocol base = builtin_von_neumann_cycle(1.0, w);
    RunResult rb = run(base);
    for (double n : {2.0, 10.0, 1000.0}) {
      Protocol p = builtin_von_neumann_cycle(n, w);
      RunResult r = run(p);
      auto rows = r.ledger.avg_rows();
      auto brows = rb.ledger.avg_rows();
      REQUIRE(rows.size() == brows.size());
      for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(std::abs(rows[i]->s_vn_system / n - brows[i]->s_vn_system) < 1e-9);
        CHECK(std::abs(rows[i]->ds_bath / n - brows[i]->ds_bath) < 1e-9);
        CHECK(std::abs(rows[i]->work / n - brows[i]->work) < 1e-9);
      }
      CHECK(std::abs(r.ledger.total_ds_bath - n * rb.ledger.total_ds_bath) < 1e-6);
    }
  }
}

TEST_CASE("amended cycle") {
  SUBCASE("Landauer reset gives zero net work over many cycles") {
    Protocol p = builtin_amended_violation_cycle();
    p.config.cycles = 10;
    RunResult r = run(p);
    CHECK(std::abs(r.ledger.total_work) < 1e-9);
    AuditReport a = audit(r, p);
    CHECK(a.clean());
    CHECK(cycle_closure(r).closed);
  }
  SUBCASE("permitted unitary reset extracts ln 2 per cycle and is flagged") {
    Protocol p = builtin_amended_violation_cycle(ResetKind::unitary_attempt);
    p.config.permit_infeasible_reset = true;
    p.config.cycles = 10;
    RunResult r = run(p);
    CHECK(std::abs(r.ledger.total_work - 10.0 * kLn2) < 1e-9);
    AuditReport a = audit(r, p);
    CHECK(a.kelvin_planck_violation);
    CHECK(a.nonphysical_present);
    int nonphysical = 0;
    for (const auto& f : a.findings)
      if (f.kind == "NONPHYSICAL") ++nonphysical;
    CHECK(nonphysical == 10);  // one per cycle at the reset step
  }
  SUBCASE("unpermitted unitary reset aborts with the step id") {
    Protocol p = builtin_amended_violation_cycle(ResetKind::unitary_attempt);
    try {
      run(p);
      CHECK(false);
    } catch (const ResetInfeasible& e) {
      CHECK(std::string(e.what()).find("step 4") != std::string::npos);
    }
  }
  SUBCASE("zero cycles give an empty ledger") {
    Protocol p = builtin_amended_violation_cycle();
    p.config.cycles = 0;
    RunResult r = run(p);
    CHECK(r.ledger.rows.empty());
  }
}

TEST_CASE("szilard engine balances measurement against erasure") {
  Protocol p = builtin_szilard();
  p.config.cycles = 5;
  RunResult r = run(p);
  CHECK(std::abs(r.ledger.total_work) < 1e-9);
  AuditReport a = audit(r, p);
  CHECK(a.clean());
  CHECK(cycle_closure(r).closed);
}

TEST_CASE("auditor soundness on randomized benign protocols") {
  std::mt19937 rng(42);
  std::uniform_int_distribution<int> length_pick(1, 8), kind_pick(0, 5);
  std::uniform_real_distribution<double> amp(0.05, 0.95), param(0.1, 0.9),
      volume_pick(0.3, 1.0);

  for (int trial = 0; trial < 200; ++trial) {
    Protocol p;
    p.name = "random-benign";
    p.layout = SystemLayout({{"spin", Role::spin, 2, {"+z", "-z"}},
                             {"pos", Role::position, 2, {"L", "R"}},
                             {"M", Role::apparatus, 3, {"ready", "+", "-"}}});
    p.config.memory_labels = {"M"};

    ProtocolStep prepare;
    prepare.kind = StepKind::Prepare;
    const double a1 = std::sqrt(amp(rng));
    FactorPrep spin_prep;
    spin_prep.kind = FactorPrep::Kind::amplitudes;
    spin_prep.amplitudes = {a1, std::sqrt(1.0 - a1 * a1)};
    FactorPrep pos_prep, m_prep;
    pos_prep.kind = FactorPrep::Kind::pointer;
    pos_prep.pointer_name = "L";
    m_prep.kind = FactorPrep::Kind::pointer;
    m_prep.pointer_name = "ready";
    prepare.preparation = {{"spin", spin_prep}, {"pos", pos_prep}, {"M", m_prep}};
    p.steps.push_back(prepare);

    double v_cur = 1.0;
    bool coupled = false;
    const int length = length_pick(rng);
    for (int i = 0; i < length; ++i) {
      ProtocolStep s;
      switch (kind_pick(rng)) {
        case 0:
          s.kind = StepKind::ApplyUnitary;
          s.name = "hadamard";
          s.args = {"spin"};
          break;
        case 1:
          s.kind = StepKind::ApplyUnitary;
          s.name = "pauli_x";
          s.args = {"spin"};
          break;
        case 2:
          s.kind = StepKind::ApplyUnitary;
          s.name = "rotate_spin";
          s.args = {"spin"};
          s.param = param(rng);
          break;
        case 3:
          s.kind = StepKind::NonSelectiveMeasure;
          s.target = "spin";
          break;
        case 4:
          if (!coupled) {
            s.kind = StepKind::CoupleApparatus;
            s.target = "spin";
            s.apparatus = "M";
            coupled = true;
          } else {
            s.kind = StepKind::LandauerReset;
            s.apparatus = "M";
            coupled = false;  // the apparatus is ready again
          }
          break;
        default: {
          s.kind = StepKind::IsothermalVolume;
          s.chamber = "L";
          s.v_from = v_cur;
          s.v_to = volume_pick(rng);
          s.weight = 1.0;
          v_cur = s.v_to;
          break;
        }
      }
      p.steps.push_back(s);
    }

    CHECK_NOTHROW(validate_protocol(p));
    RunResult r = run(p);
    AuditReport report = audit(r, p);
    for (const auto& f : report.findings) CHECK(f.kind != "VIOLATION");
    CHECK(!report.kelvin_planck_violation);
    // Second-law margin is honored step by step.
    for (const auto& row : r.ledger.rows)
      if (row.branch == "AVG") CHECK(row.margin >= -1e-8);
  }
}

TEST_CASE("protocol serialization round-trips") {
  for (const auto& name : builtin_names()) {
    Protocol p = make_builtin(name, ResetKind::landauer, 0.64, 2.0);
    Protocol q = parse_protocol(serialize_protocol(p));
    CHECK(protocols_equal(p, q));
  }
  Protocol p = builtin_amended_violation_cycle(ResetKind::unitary_attempt);
  p.config.permit_infeasible_reset = true;
  p.config.mode = Mode::no_collapse;
  p.config.cycles = 3;
  Protocol q = parse_protocol(serialize_protocol(p));
  CHECK(protocols_equal(p, q));
}

TEST_CASE("unknown protocol keys are rejected with location info") {
  std::string text = serialize_protocol(builtin_szilard());
  text.insert(text.find("\"config\": {") + 11, "\"frobnicate\": 1, ");
  try {
    parse_protocol(text);
    CHECK(false);
  } catch (const ProtocolParseError& e) {
    CHECK(std::string(e.what()).find("frobnicate") != std::string::npos);
    CHECK(std::string(e.what()).find("config") != std::string::npos);
  }
}
