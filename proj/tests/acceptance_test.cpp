// Acceptance suite: each test case checks one acceptance criterion and prints
// exactly one PASS/FAIL line for it.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "qtherm/cli.hpp"
#include "qtherm/engine.hpp"

using namespace qtherm;

namespace {

const double kLn2 = std::log(2.0);
const double kTol = 1e-9;

double h2(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
}

void report(int criterion, const char* description, bool ok) {
  std::printf("ACCEPTANCE %d: %s - %s\n", criterion, ok ? "PASS" : "FAIL", description);
  CHECK(ok);
}

const LedgerRow& avg_row(const Ledger& ledger, int cycle, int step) {
  for (const auto& r : ledger.rows)
    if (r.cycle == cycle && r.step_id == step && r.branch == "AVG") return r;
  REQUIRE(false);
  return ledger.rows.front();
}

DensityState random_density(const SystemLayout& layout, std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const int d = layout.total_dimension();
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = Complex(g(rng), g(rng));
  Matrix rho = a * a.adjoint();
  rho /= rho.trace();
  return {layout, rho};
}

Matrix random_unitary(int d, std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ();
}

Vector random_unit_vector(int dim, std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = Complex(g(rng), g(rng));
  return v / v.norm();
}

}  // namespace

TEST_CASE("criterion 1: gas cycle closure and pre-compression entropy") {
  bool ok = true;
  for (double w1sq : {0.5, 0.64, 0.9}) {
    for (double n : {1.0, 10.0, 1000.0}) {
      Protocol p = builtin_von_neumann_cycle(n, w1sq);
      RunResult r = run(p);
      // Total entropy change of gas and bath from the post-measurement stage
      // to the end of the cycle.
      const double delta = r.ledger.rows.back().s_total_running -
                           avg_row(r.ledger, 1, 3).s_total_running;
      ok = ok && std::abs(delta) <= kTol;
      // Gas entropy before compression.
      const double gas = avg_row(r.ledger, 1, 4).s_vn_system;
      ok = ok && std::abs(gas - n * h2(w1sq)) <= kTol;
      ok = ok && cycle_closure(r).closed;
    }
  }
  report(1, "gas cycle: total dS(gas+bath)=0 over the cycle body; gas entropy -N sum w^2 ln w^2", ok);
}

TEST_CASE("criterion 2: measurement raises the spin entropy to ln 2") {
  RunResult r = run(builtin_hs_cycle());
  const double before =
      von_neumann_entropy(partial_trace(r.step_states[0], {"spin"}));
  const double after =
      von_neumann_entropy(partial_trace(r.step_states[1], {"spin"}));
  const bool ok = std::abs(before) <= kTol && std::abs(after - kLn2) <= kTol;
  report(2, "spin marginal entropy rises 0 -> ln 2 at the spin measurement", ok);
}

TEST_CASE("criterion 3: location measurement keeps the joint entropy, clears H(S|M)") {
  bool ok = true;
  for (Mode mode : {Mode::collapse, Mode::no_collapse}) {
    Protocol p = builtin_hs_cycle();
    p.config.mode = mode;
    RunResult r = run(p);
    const LedgerRow& before = avg_row(r.ledger, 1, 3);
    const LedgerRow& after = avg_row(r.ledger, 1, 4);
    ok = ok && std::abs(after.s_vn_joint - before.s_vn_joint) < kTol;
    ok = ok && std::abs(before.h_cond_classical - kLn2) <= kTol;
    ok = ok && std::abs(after.h_cond_classical) <= kTol;
  }
  report(3, "joint S_vN invariant across the location measurement; H(S|M) drops ln 2 -> 0", ok);
}

TEST_CASE("criterion 4: permitted unitary resets extract k ln 2 and trip Kelvin-Planck") {
  bool ok = true;
  for (int k : {1, 10, 100}) {
    Protocol p = builtin_amended_violation_cycle(ResetKind::unitary_attempt);
    p.config.permit_infeasible_reset = true;
    p.config.cycles = k;
    RunResult r = run(p);
    AuditReport a = audit(r, p);
    ok = ok && std::abs(a.net_work - k * kLn2) <= kTol;
    ok = ok && a.closure.closed;
    ok = ok && a.kelvin_planck_violation;
  }
  report(4, "amended cycle with permitted resets: net W = k ln 2, closed, VIOLATION", ok);
}

TEST_CASE("criterion 5: Landauer reset restores the balance") {
  Protocol p = builtin_amended_violation_cycle(ResetKind::landauer);
  p.config.cycles = 3;
  RunResult r = run(p);
  AuditReport a = audit(r, p);
  bool ok = std::abs(a.net_work) <= kTol && a.clean();
  for (int cycle = 1; cycle <= 3; ++cycle)
    ok = ok && std::abs(avg_row(r.ledger, cycle, 4).ds_bath - kLn2) <= kTol;
  report(5, "amended cycle with Landauer reset: net W = 0, clean audit, reset pays ln 2 to the bath", ok);
}

TEST_CASE("criterion 6: unitary reset feasibility is Gram-matrix equality") {
  Vector plus(3), minus(3), ready(3);
  plus << 0, 1, 0;
  minus << 0, 0, 1;
  ready << 1, 0, 0;
  FeasibilityVerdict v = unitary_reset_feasible({{plus, minus}, {ready, ready}});
  bool ok = !v.feasible && std::abs(v.max_gram_discrepancy - 1.0) <= kTol;

  std::mt19937 rng(7);
  std::uniform_int_distribution<int> dim_pick(2, 4), count_pick(1, 3);
  std::bernoulli_distribution preserve(0.5);
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const int dim = dim_pick(rng);
    const int count = count_pick(rng);
    ResetProblem problem;
    for (int i = 0; i < count; ++i)
      problem.sources.push_back(random_unit_vector(dim, rng));
    if (preserve(rng)) {
      Matrix q = random_unitary(dim, rng);
      for (const auto& s : problem.sources) problem.targets.push_back(q * s);
    } else {
      for (int i = 0; i < count; ++i)
        problem.targets.push_back(random_unit_vector(dim, rng));
    }
    double discrepancy = 0.0;
    for (size_t i = 0; i < problem.sources.size(); ++i)
      for (size_t j = 0; j < problem.sources.size(); ++j)
        discrepancy = std::max(discrepancy,
                               std::abs(problem.sources[i].dot(problem.sources[j]) -
                                        problem.targets[i].dot(problem.targets[j])));
    FeasibilityVerdict verdict = unitary_reset_feasible(problem);
    ok = ok && verdict.feasible == (discrepancy <= 1e-9);
  }
  report(6, "reset of {|+>,|->} to |ready> infeasible (discrepancy 1); feasibility == Gram equality on 1000 problems", ok);
}

TEST_CASE("criterion 7: interpretation-mode equivalence via cmd_compare") {
  std::ostringstream out, err;
  const int code = cli::cmd_compare("builtin:hs-cycle", cli::Overrides{}, out, err);
  report(7, "compare on the standard cycle exits 0 (joint columns agree within 1e-9)", code == 0);
}

TEST_CASE("criterion 8: entropy property suites") {
  std::mt19937 rng(123);
  bool ok = true;

  // Subadditivity on 1000 random bipartite states.
  SystemLayout ab({{"a", Role::ancilla, 2, {"0", "1"}},
                   {"b", Role::ancilla, 3, {"0", "1", "2"}}});
  for (int i = 0; i < 1000 && ok; ++i) {
    DensityState rho = random_density(ab, rng);
    const double joint = von_neumann_entropy(rho);
    const double sa = von_neumann_entropy(partial_trace(rho, {"a"}));
    const double sb = von_neumann_entropy(partial_trace(rho, {"b"}));
    ok = ok && joint <= sa + sb + kTol;
  }

  // Non-selective measurement never lowers the entropy (1000 random pairs).
  SystemLayout q({{"q", Role::ancilla, 2, {"0", "1"}}});
  for (int i = 0; i < 1000 && ok; ++i) {
    DensityState rho = random_density(q, rng);
    // A random basis is equivalent to a random rotation before the pointer
    // measurement.
    rho = apply_unitary(rho, UnitaryOp{q, random_unitary(2, rng)});
    DensityState out = nonselective_measure(rho, pointer_measurement(q, "q"));
    ok = ok && von_neumann_entropy(out) >= von_neumann_entropy(rho) - kTol;
  }

  // Selective outcomes average back to the non-selective state.
  for (int i = 0; i < 200 && ok; ++i) {
    DensityState rho = random_density(ab, rng);
    auto m = pointer_measurement(ab, "b");
    auto outcomes = selective_measure(rho, m);
    Matrix avg = Matrix::Zero(6, 6);
    for (const auto& o : outcomes) avg += o.probability * o.post_state.matrix;
    ok = ok && (avg - nonselective_measure(rho, m).matrix).cwiseAbs().maxCoeff() <= kTol;
  }

  // Unitary invariance of the von Neumann entropy.
  for (int i = 0; i < 200 && ok; ++i) {
    DensityState rho = random_density(ab, rng);
    DensityState rotated = apply_unitary(rho, UnitaryOp{ab, random_unitary(6, rng)});
    ok = ok && std::abs(von_neumann_entropy(rotated) - von_neumann_entropy(rho)) <= kTol;
  }

  // Classical chain rule: H(S,M) = H(M) + H(S|M).
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200 && ok; ++i) {
    Matrix diag = Matrix::Zero(6, 6);
    double total = 0.0;
    for (int k = 0; k < 6; ++k) {
      diag(k, k) = u(rng);
      total += diag(k, k).real();
    }
    diag /= total;
    DensityState rho{ab, diag};
    PointerDistribution joint = pointer_distribution(rho, {"a", "b"});
    PointerDistribution marginal_m = pointer_distribution(rho, {"b"});
    const double residual = shannon_entropy(joint) - shannon_entropy(marginal_m) -
                            classical_conditional_entropy(joint, {"a"}, {"b"});
    ok = ok && std::abs(residual) < kTol;
  }

  report(8, "subadditivity, measurement monotonicity, selective averaging, unitary invariance, chain rule", ok);
}

TEST_CASE("criterion 9: the location record is redundant") {
  RunResult standard = run(builtin_hs_cycle());
  RunResult variant = run(builtin_hs_cycle_record_conditioned());
  bool ok = std::abs(standard.ledger.total_work - variant.ledger.total_work) <= kTol;
  ok = ok && std::abs(standard.ledger.total_heat - variant.ledger.total_heat) <= kTol;
  ok = ok &&
       std::abs(standard.ledger.total_ds_bath - variant.ledger.total_ds_bath) <= kTol;
  ok = ok && std::abs(standard.ledger.rows.back().s_total_running -
                      variant.ledger.rows.back().s_total_running) <= kTol;
  ok = ok && cycle_closure(standard).closed && cycle_closure(variant).closed;
  report(9, "record-conditioned variant matches the standard cycle ledger totals", ok);
}
