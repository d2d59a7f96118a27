#ifndef QTHERM_ENGINE_HPP
#define QTHERM_ENGINE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qtherm/channels.hpp"
#include "qtherm/entropy.hpp"
#include "qtherm/qcore.hpp"
#include "qtherm/thermo.hpp"

namespace qtherm {

enum class StepKind {
  Prepare,
  ApplyUnitary,
  NonSelectiveMeasure,
  SelectiveMeasure,
  CoupleApparatus,
  Separate,
  IsothermalVolume,
  CompressVacuum,
  ExtractWorkKnownPosition,
  LandauerReset,
  UnitaryResetAttempt,
  RemovePartition,
  InsertPartition,
};

std::string step_kind_name(StepKind k);
StepKind step_kind_from_name(const std::string& name);

// Initial factor preparation: a pointer-basis name, an explicit real
// amplitude vector, or the uniform pointer mixture.
struct FactorPrep {
  enum class Kind { pointer, amplitudes, uniform } kind = Kind::pointer;
  std::string pointer_name;
  std::vector<double> amplitudes;

  bool operator==(const FactorPrep&) const = default;
};

struct ProtocolStep {
  StepKind kind = StepKind::Prepare;

  // Prepare
  std::map<std::string, FactorPrep> preparation;
  double initial_volume_l = 1.0;
  double initial_volume_r = 0.0;

  // ApplyUnitary: registry name plus label arguments and a scalar parameter.
  std::string name;
  std::vector<std::string> args;
  double param = 0.0;

  // Measurements and couplings.
  std::string target;
  std::string apparatus;  // record register (couple) or conditioning register
  std::string basis = "pointer";

  // Volume steps.
  std::string chamber;
  double v_from = 0.0;
  double v_to = 0.0;
  double weight = 1.0;

  // Separate: open the twin box (second chamber of equal volume) first.
  bool open_twin = false;

  bool operator==(const ProtocolStep&) const = default;
};

enum class Mode { collapse, no_collapse };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct RunConfig {
  double temperature = 1.0;
  double k_b = 1.0;
  Mode mode = Mode::collapse;
  bool permit_infeasible_reset = false;
  int cycles = 1;
  std::uint64_t seed = 42;
  double particle_scale = 1.0;  // N for the gas cycle; scales entropy columns
  std::vector<std::string> memory_labels;  // conditioning set for H(S|M)

  bool operator==(const RunConfig&) const = default;
};

struct Protocol {
  std::string name;
  SystemLayout layout;
  std::vector<ProtocolStep> steps;
  RunConfig config;
};

struct Branch {
  double probability = 1.0;
  DensityState state;
  std::vector<std::pair<int, std::string>> records;  // (step id, outcome)
  VolumeRegister volume;
};

struct LedgerRow {
  int cycle = 0;
  int step_id = 0;
  std::string step_kind;
  std::string branch;  // branch index or "AVG"
  double probability = 1.0;
  double s_vn_system = 0.0;
  double s_vn_joint = 0.0;
  double h_cond_classical = 0.0;
  double ds_bath = 0.0;
  double heat = 0.0;
  double work = 0.0;
  double s_total_running = 0.0;
  std::string flags;

  // Not serialized: audit bookkeeping.
  double ds_spatial = 0.0;
  double margin = 0.0;
};

struct Ledger {
  std::string protocol_name;
  Mode mode = Mode::collapse;
  std::uint64_t seed = 42;
  std::vector<LedgerRow> rows;

  double total_work = 0.0;
  double total_heat = 0.0;
  double total_ds_bath = 0.0;

  std::vector<const LedgerRow*> avg_rows() const;
};

struct RunResult {
  Ledger ledger;
  std::vector<Branch> branches;
  DensityState initial_state;  // probability-averaged, post-Prepare
  VolumeRegister initial_volume;
  std::vector<DensityState> step_states;  // averaged state after each step
  BathModel bath;
  bool has_initial = false;
};

struct ClosureVerdict {
  bool closed = false;
  double state_distance = 0.0;
  bool volumes_match = false;
};

struct AuditFinding {
  int cycle = 0;
  int step_id = 0;
  std::string kind;  // "VIOLATION" or "NONPHYSICAL"
  double margin = 0.0;
};

struct AuditReport {
  std::vector<AuditFinding> findings;
  ClosureVerdict closure;
  bool kelvin_planck_violation = false;
  double net_work = 0.0;
  bool nonphysical_present = false;
  bool clean() const { return findings.empty() && !kelvin_planck_violation; }
};

// Structural checks (labels, arities, step parameters); run() calls this too.
void validate_protocol(const Protocol& p);

RunResult run(const Protocol& p);
AuditReport audit(const RunResult& result, const Protocol& p);
ClosureVerdict cycle_closure(const RunResult& result);

enum class ResetKind { landauer, unitary_attempt };

Protocol builtin_von_neumann_cycle(double n_particles, double w1_squared);
Protocol builtin_hs_cycle(ResetKind reset = ResetKind::landauer);
Protocol builtin_amended_violation_cycle(ResetKind reset = ResetKind::landauer);
Protocol builtin_szilard(ResetKind reset = ResetKind::landauer);
// Variant of the standard cycle that conditions the compression on the spin
// record directly, skipping the location measurement.
Protocol builtin_hs_cycle_record_conditioned(ResetKind reset = ResetKind::landauer);

std::vector<std::string> builtin_names();
// Resolves "builtin:<name>"; w1_squared and n apply to the gas cycle.
Protocol make_builtin(const std::string& name, ResetKind reset, double w1_squared,
                      double n_particles);

}  // namespace qtherm

#endif
