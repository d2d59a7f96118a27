#include <cmath>

#include "qtherm/engine.hpp"

namespace qtherm {

namespace {

FactorPrep pointer_prep(const std::string& name) {
  FactorPrep p;
  p.kind = FactorPrep::Kind::pointer;
  p.pointer_name = name;
  return p;
}

FactorPrep uniform_prep() {
  FactorPrep p;
  p.kind = FactorPrep::Kind::uniform;
  return p;
}

FactorPrep amplitude_prep(std::vector<double> amps) {
  FactorPrep p;
  p.kind = FactorPrep::Kind::amplitudes;
  p.amplitudes = std::move(amps);
  return p;
}

SystemLayout hs_layout() {
  return SystemLayout({
      {"spin", Role::spin, 2, {"+z", "-z"}},
      {"pos", Role::position, 2, {"L", "R"}},
      {"M", Role::apparatus, 3, {"ready", "+", "-"}},
      {"M2", Role::apparatus, 2, {"l", "r"}},
  });
}

ProtocolStep reset_step(ResetKind reset, const std::string& apparatus) {
  ProtocolStep s;
  s.kind = reset == ResetKind::landauer ? StepKind::LandauerReset
                                        : StepKind::UnitaryResetAttempt;
  s.apparatus = apparatus;
  return s;
}

}  // namespace

Protocol builtin_hs_cycle(ResetKind reset) {
  Protocol p;
  p.name = "hs-cycle";
  p.layout = hs_layout();
  p.config.memory_labels = {"M2"};
  const double a = 1.0 / std::sqrt(2.0);

  ProtocolStep prepare;
  prepare.kind = StepKind::Prepare;
  prepare.preparation = {{"spin", amplitude_prep({a, a})},
                         {"pos", pointer_prep("L")},
                         {"M", pointer_prep("ready")},
                         {"M2", pointer_prep("l")}};
  prepare.initial_volume_l = 0.5;
  prepare.initial_volume_r = 0.0;
  p.steps.push_back(prepare);

  ProtocolStep couple;
  couple.kind = StepKind::CoupleApparatus;
  couple.target = "spin";
  couple.apparatus = "M";
  p.steps.push_back(couple);

  ProtocolStep separate;
  separate.kind = StepKind::Separate;
  separate.args = {"spin", "pos"};
  separate.open_twin = true;
  p.steps.push_back(separate);

  ProtocolStep measure;
  measure.kind = StepKind::SelectiveMeasure;
  measure.target = "pos";
  measure.apparatus = "M2";
  p.steps.push_back(measure);

  ProtocolStep compress;
  compress.kind = StepKind::CompressVacuum;
  compress.apparatus = "M2";
  p.steps.push_back(compress);

  ProtocolStep ret;
  ret.kind = StepKind::ApplyUnitary;
  ret.name = "spin_return";
  ret.args = {"spin", "M"};
  p.steps.push_back(ret);

  p.steps.push_back(reset_step(reset, "M2"));
  p.steps.push_back(reset_step(reset, "M"));
  return p;
}

Protocol builtin_hs_cycle_record_conditioned(ResetKind reset) {
  Protocol p;
  p.name = "hs-cycle-record-conditioned";
  p.layout = hs_layout();
  p.config.memory_labels = {"M"};
  const double a = 1.0 / std::sqrt(2.0);

  ProtocolStep prepare;
  prepare.kind = StepKind::Prepare;
  prepare.preparation = {{"spin", amplitude_prep({a, a})},
                         {"pos", pointer_prep("L")},
                         {"M", pointer_prep("ready")},
                         {"M2", pointer_prep("l")}};
  prepare.initial_volume_l = 0.5;
  prepare.initial_volume_r = 0.0;
  p.steps.push_back(prepare);

  ProtocolStep couple;
  couple.kind = StepKind::CoupleApparatus;
  couple.target = "spin";
  couple.apparatus = "M";
  p.steps.push_back(couple);

  ProtocolStep separate;
  separate.kind = StepKind::Separate;
  separate.args = {"spin", "pos"};
  separate.open_twin = true;
  p.steps.push_back(separate);

  ProtocolStep compress;
  compress.kind = StepKind::CompressVacuum;
  compress.apparatus = "M";  // the spin record determines the location
  p.steps.push_back(compress);

  ProtocolStep ret;
  ret.kind = StepKind::ApplyUnitary;
  ret.name = "spin_return";
  ret.args = {"spin", "M"};
  p.steps.push_back(ret);

  p.steps.push_back(reset_step(reset, "M"));
  return p;
}

Protocol builtin_amended_violation_cycle(ResetKind reset) {
  Protocol p;
  p.name = "amended-cycle";
  p.layout = hs_layout();
  p.config.memory_labels = {"M2"};
  const double a = 1.0 / std::sqrt(2.0);

  // Steady-state cycle: the partition is in, the location unknown. Each
  // cycle measures, extracts against the partition, resets the record, and
  // re-inserts the partition, returning to the same state.
  ProtocolStep prepare;
  prepare.kind = StepKind::Prepare;
  prepare.preparation = {{"spin", amplitude_prep({a, a})},
                         {"pos", uniform_prep()},
                         {"M", pointer_prep("ready")},
                         {"M2", pointer_prep("l")}};
  prepare.initial_volume_l = 0.5;
  prepare.initial_volume_r = 0.5;
  p.steps.push_back(prepare);

  ProtocolStep measure;
  measure.kind = StepKind::SelectiveMeasure;
  measure.target = "pos";
  measure.apparatus = "M2";
  p.steps.push_back(measure);

  ProtocolStep extract;
  extract.kind = StepKind::ExtractWorkKnownPosition;
  extract.apparatus = "M2";
  p.steps.push_back(extract);

  p.steps.push_back(reset_step(reset, "M2"));
  p.steps.push_back(reset_step(reset, "M"));

  ProtocolStep insert;
  insert.kind = StepKind::InsertPartition;
  p.steps.push_back(insert);
  return p;
}

Protocol builtin_szilard(ResetKind reset) {
  Protocol p;
  p.name = "szilard";
  p.layout = SystemLayout({
      {"pos", Role::position, 2, {"L", "R"}},
      {"mem", Role::apparatus, 2, {"l", "r"}},
  });
  p.config.memory_labels = {"mem"};

  ProtocolStep prepare;
  prepare.kind = StepKind::Prepare;
  prepare.preparation = {{"pos", uniform_prep()}, {"mem", pointer_prep("l")}};
  prepare.initial_volume_l = 0.5;
  prepare.initial_volume_r = 0.5;
  p.steps.push_back(prepare);

  ProtocolStep measure;
  measure.kind = StepKind::SelectiveMeasure;
  measure.target = "pos";
  measure.apparatus = "mem";
  p.steps.push_back(measure);

  ProtocolStep extract;
  extract.kind = StepKind::ExtractWorkKnownPosition;
  extract.apparatus = "mem";
  p.steps.push_back(extract);

  p.steps.push_back(reset_step(reset, "mem"));

  ProtocolStep insert;
  insert.kind = StepKind::InsertPartition;
  p.steps.push_back(insert);
  return p;
}

Protocol builtin_von_neumann_cycle(double n_particles, double w1_squared) {
  if (w1_squared < 0.0 || w1_squared > 1.0)
    throw Error("vn-cycle: w1_squared must lie in [0, 1]");
  if (n_particles <= 0.0) throw Error("vn-cycle: particle count must be positive");
  Protocol p;
  p.name = "vn-cycle";
  p.layout = SystemLayout({
      {"spin", Role::spin, 2, {"+", "-"}},
      {"pos", Role::position, 2, {"L", "R"}},
  });
  p.config.particle_scale = n_particles;
  const double w2_squared = 1.0 - w1_squared;

  ProtocolStep prepare;
  prepare.kind = StepKind::Prepare;
  prepare.preparation = {{"spin", pointer_prep("+")}, {"pos", pointer_prep("L")}};
  prepare.initial_volume_l = 0.5;
  prepare.initial_volume_r = 0.0;
  p.steps.push_back(prepare);

  ProtocolStep rotate;
  rotate.kind = StepKind::ApplyUnitary;
  rotate.name = "rotate_spin";
  rotate.args = {"spin"};
  rotate.param = w1_squared;
  p.steps.push_back(rotate);

  ProtocolStep measure;
  measure.kind = StepKind::NonSelectiveMeasure;
  measure.target = "spin";
  p.steps.push_back(measure);

  ProtocolStep separate;
  separate.kind = StepKind::Separate;
  separate.args = {"spin", "pos"};
  separate.open_twin = true;
  p.steps.push_back(separate);

  ProtocolStep squeeze_l;
  squeeze_l.kind = StepKind::IsothermalVolume;
  squeeze_l.chamber = "L";
  squeeze_l.v_from = 0.5;
  squeeze_l.v_to = 0.5 * w1_squared;
  squeeze_l.weight = n_particles * w1_squared;
  p.steps.push_back(squeeze_l);

  ProtocolStep squeeze_r;
  squeeze_r.kind = StepKind::IsothermalVolume;
  squeeze_r.chamber = "R";
  squeeze_r.v_from = 0.5;
  squeeze_r.v_to = 0.5 * w2_squared;
  squeeze_r.weight = n_particles * w2_squared;
  p.steps.push_back(squeeze_r);

  ProtocolStep merge;
  merge.kind = StepKind::ApplyUnitary;
  merge.name = "vn_merge";
  merge.args = {"spin", "pos"};
  p.steps.push_back(merge);

  ProtocolStep remove;
  remove.kind = StepKind::RemovePartition;
  remove.weight = n_particles;
  p.steps.push_back(remove);
  return p;
}

std::vector<std::string> builtin_names() {
  return {"builtin:vn-cycle", "builtin:hs-cycle", "builtin:amended-cycle",
          "builtin:szilard"};
}

Protocol make_builtin(const std::string& name, ResetKind reset, double w1_squared,
                      double n_particles) {
  if (name == "builtin:vn-cycle") return builtin_von_neumann_cycle(n_particles, w1_squared);
  if (name == "builtin:hs-cycle") return builtin_hs_cycle(reset);
  if (name == "builtin:amended-cycle") return builtin_amended_violation_cycle(reset);
  if (name == "builtin:szilard") return builtin_szilard(reset);
  throw Error("unknown builtin protocol: " + name);
}

}  // namespace qtherm
