#include "qtherm/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace qtherm {

namespace {

constexpr double kLn2 = 0.6931471805599453;

std::string join_key(const std::vector<int>& parts) {
  std::ostringstream os;
  for (int v : parts) os << v << ',';
  return os.str();
}

double shannon_of_map(const std::map<std::string, double>& dist) {
  double h = 0.0;
  for (const auto& [key, p] : dist)
    if (p > 1e-15) h -= p * std::log(p);
  return h;
}

std::string records_key(const Branch& b) {
  std::ostringstream os;
  for (const auto& [id, outcome] : b.records) os << id << ':' << outcome << ';';
  return os.str();
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Replace one factor by a diagonal pointer mixture, discarding its prior
// contents (and any correlations through it).
DensityState reset_factor(const DensityState& rho, const std::string& label,
                          const std::vector<double>& weights) {
  const auto& layout = rho.layout;
  const int f = layout.index_of(label);
  const int dim_f = layout.subsystems()[f].dimension;
  if (static_cast<int>(weights.size()) != dim_f)
    throw LayoutConflict("reset_factor: weight vector does not match " + label);

  if (layout.factor_count() == 1) {
    Matrix m = Matrix::Zero(dim_f, dim_f);
    for (int k = 0; k < dim_f; ++k) m(k, k) = weights[k];
    return DensityState(layout, std::move(m));
  }

  std::set<std::string> keep;
  for (const auto& l : layout.labels())
    if (l != label) keep.insert(l);
  DensityState rest = partial_trace(rho, keep);

  const int d = layout.total_dimension();
  Matrix out = Matrix::Zero(d, d);
  auto rest_index = [&](const std::vector<int>& sub) {
    std::vector<int> r;
    r.reserve(sub.size() - 1);
    for (int k = 0; k < layout.factor_count(); ++k)
      if (k != f) r.push_back(sub[k]);
    return rest.layout.flatten(r);
  };
  for (int i = 0; i < d; ++i) {
    const auto si = layout.unflatten(i);
    if (weights[si[f]] == 0.0) continue;
    for (int j = 0; j < d; ++j) {
      const auto sj = layout.unflatten(j);
      if (si[f] != sj[f]) continue;
      out(i, j) = weights[si[f]] * rest.matrix(rest_index(si), rest_index(sj));
    }
  }
  return DensityState(layout, std::move(out));
}

std::vector<std::string> labels_with_role(const SystemLayout& layout, Role role) {
  std::vector<std::string> out;
  for (const auto& s : layout.subsystems())
    if (s.role == role) out.push_back(s.label);
  return out;
}

std::string position_label(const SystemLayout& layout, int step_id) {
  const auto pos = labels_with_role(layout, Role::position);
  if (pos.size() != 1)
    throw StepError(step_id, "volume bookkeeping needs exactly one position subsystem");
  if (layout.spec(pos[0]).dimension != 2)
    throw StepError(step_id, "position subsystem must be 2-dimensional");
  return pos[0];
}

UnitaryOp named_unitary(const SystemLayout& layout, const ProtocolStep& step) {
  const std::string& name = step.name;
  auto need_args = [&](size_t n) {
    if (step.args.size() != n)
      throw LayoutConflict("unitary " + name + " expects " + std::to_string(n) +
                           " subsystem arguments");
  };
  auto qubit_dim = [&](const std::string& label) {
    if (layout.spec(label).dimension != 2)
      throw LayoutConflict("unitary " + name + " needs a 2-dimensional " + label);
  };
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  if (name == "hadamard" || name == "pauli_x" || name == "rotate_spin") {
    need_args(1);
    qubit_dim(step.args[0]);
    Matrix u(2, 2);
    if (name == "hadamard") {
      u << inv_sqrt2, inv_sqrt2, inv_sqrt2, -inv_sqrt2;
    } else if (name == "pauli_x") {
      u << 0, 1, 1, 0;
    } else {
      if (step.param < 0.0 || step.param > 1.0)
        throw LayoutConflict("rotate_spin: param must be a probability");
      const double w1 = std::sqrt(step.param), w2 = std::sqrt(1.0 - step.param);
      u << w1, -w2, w2, w1;
    }
    return UnitaryOp{layout, embed(layout, u, {step.args[0]})};
  }
  if (name == "separation") {
    need_args(2);
    return separation_unitary(layout, step.args[0], step.args[1]);
  }
  if (name == "spin_return") {
    need_args(2);
    qubit_dim(step.args[0]);
    const int da = layout.spec(step.args[1]).dimension;
    if (da != 3)
      throw LayoutConflict("spin_return needs a 3-state apparatus (ready/+/-)");
    Matrix h(2, 2), hx(2, 2);
    h << inv_sqrt2, inv_sqrt2, inv_sqrt2, -inv_sqrt2;
    hx << inv_sqrt2, inv_sqrt2, -inv_sqrt2, inv_sqrt2;  // H * X
    Matrix u = Matrix::Zero(2 * da, 2 * da);
    for (int a = 0; a < da; ++a) {
      Matrix block = Matrix::Identity(2, 2);
      if (a == 1) block = h;
      if (a == 2) block = hx;
      for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) u(t * da + a, s * da + a) = block(t, s);
    }
    return UnitaryOp{layout, embed(layout, u, {step.args[0], step.args[1]})};
  }
  if (name == "vn_merge") {
    need_args(2);
    qubit_dim(step.args[0]);
    qubit_dim(step.args[1]);
    // Conditioned on the chamber, rotate every spin record onto pointer
    // index 0: identity in the L sector, spin flip in the R sector.
    Matrix u = Matrix::Zero(4, 4);
    u(0, 0) = 1.0;
    u(2, 2) = 1.0;
    u(1, 3) = 1.0;
    u(3, 1) = 1.0;
    return UnitaryOp{layout, embed(layout, u, {step.args[0], step.args[1]})};
  }
  throw LayoutConflict("unknown unitary: " + name);
}

}  // namespace

std::string step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::Prepare: return "Prepare";
    case StepKind::ApplyUnitary: return "ApplyUnitary";
    case StepKind::NonSelectiveMeasure: return "NonSelectiveMeasure";
    case StepKind::SelectiveMeasure: return "SelectiveMeasure";
    case StepKind::CoupleApparatus: return "CoupleApparatus";
    case StepKind::Separate: return "Separate";
    case StepKind::IsothermalVolume: return "IsothermalVolume";
    case StepKind::CompressVacuum: return "CompressVacuum";
    case StepKind::ExtractWorkKnownPosition: return "ExtractWorkKnownPosition";
    case StepKind::LandauerReset: return "LandauerReset";
    case StepKind::UnitaryResetAttempt: return "UnitaryResetAttempt";
    case StepKind::RemovePartition: return "RemovePartition";
    case StepKind::InsertPartition: return "InsertPartition";
  }
  throw Error("unknown step kind");
}

StepKind step_kind_from_name(const std::string& name) {
  static const std::map<std::string, StepKind> table = {
      {"Prepare", StepKind::Prepare},
      {"ApplyUnitary", StepKind::ApplyUnitary},
      {"NonSelectiveMeasure", StepKind::NonSelectiveMeasure},
      {"SelectiveMeasure", StepKind::SelectiveMeasure},
      {"CoupleApparatus", StepKind::CoupleApparatus},
      {"Separate", StepKind::Separate},
      {"IsothermalVolume", StepKind::IsothermalVolume},
      {"CompressVacuum", StepKind::CompressVacuum},
      {"ExtractWorkKnownPosition", StepKind::ExtractWorkKnownPosition},
      {"LandauerReset", StepKind::LandauerReset},
      {"UnitaryResetAttempt", StepKind::UnitaryResetAttempt},
      {"RemovePartition", StepKind::RemovePartition},
      {"InsertPartition", StepKind::InsertPartition},
  };
  auto it = table.find(name);
  if (it == table.end()) throw Error("unknown step kind: " + name);
  return it->second;
}

std::string mode_name(Mode m) {
  return m == Mode::collapse ? "collapse" : "no-collapse";
}

Mode mode_from_name(const std::string& name) {
  if (name == "collapse") return Mode::collapse;
  if (name == "no-collapse" || name == "no_collapse") return Mode::no_collapse;
  throw Error("unknown interpretation mode: " + name);
}

std::vector<const LedgerRow*> Ledger::avg_rows() const {
  std::vector<const LedgerRow*> out;
  for (const auto& r : rows)
    if (r.branch == "AVG") out.push_back(&r);
  return out;
}

void validate_protocol(const Protocol& p) {
  if (p.layout.factor_count() == 0) throw LayoutConflict("protocol has an empty layout");
  if (p.config.cycles < 0) throw Error("config: cycles must be >= 0");
  if (p.config.temperature <= 0.0) throw Error("config: temperature must be positive");
  if (p.config.k_b <= 0.0) throw Error("config: k_b must be positive");
  if (p.config.particle_scale <= 0.0)
    throw Error("config: particle_scale must be positive");
  for (const auto& l : p.config.memory_labels) p.layout.index_of(l);
  if (p.steps.empty()) return;  // empty protocol: empty ledger, trivially closed
  if (p.steps.front().kind != StepKind::Prepare)
    throw Error("the first step must be Prepare");
  for (size_t i = 0; i < p.steps.size(); ++i) {
    const auto& s = p.steps[i];
    const int id = static_cast<int>(i) + 1;
    if (i > 0 && s.kind == StepKind::Prepare)
      throw Error("step " + std::to_string(id) + ": Prepare is only valid as step 1");
    switch (s.kind) {
      case StepKind::Prepare:
        for (const auto& l : p.layout.labels())
          if (!s.preparation.count(l))
            throw Error("Prepare: missing initial state for subsystem " + l);
        for (const auto& [l, prep] : s.preparation) {
          const auto& spec = p.layout.spec(l);
          if (prep.kind == FactorPrep::Kind::pointer) {
            const auto& basis = spec.pointer_basis;
            if (std::find(basis.begin(), basis.end(), prep.pointer_name) == basis.end())
              throw Error("Prepare: no pointer state " + prep.pointer_name + " on " + l);
          } else if (prep.kind == FactorPrep::Kind::amplitudes) {
            if (static_cast<int>(prep.amplitudes.size()) != spec.dimension)
              throw Error("Prepare: amplitude count does not match dimension of " + l);
          }
        }
        if (s.initial_volume_l < 0.0 || s.initial_volume_r < 0.0 ||
            s.initial_volume_l + s.initial_volume_r > 1.0 + 1e-12)
          throw Error("Prepare: volume fractions must be nonnegative with sum <= 1");
        break;
      case StepKind::ApplyUnitary:
        named_unitary(p.layout, s);  // throws on unknown names or bad arity
        break;
      case StepKind::NonSelectiveMeasure:
      case StepKind::SelectiveMeasure:
        p.layout.index_of(s.target);
        if (s.basis != "pointer" && s.basis != "x")
          throw Error("step " + std::to_string(id) + ": basis must be pointer or x");
        if (!s.apparatus.empty()) p.layout.index_of(s.apparatus);
        break;
      case StepKind::CoupleApparatus:
        p.layout.index_of(s.target);
        p.layout.index_of(s.apparatus);
        break;
      case StepKind::Separate:
        if (s.args.size() != 2)
          throw Error("step " + std::to_string(id) + ": Separate needs [spin, position]");
        p.layout.index_of(s.args[0]);
        p.layout.index_of(s.args[1]);
        break;
      case StepKind::IsothermalVolume:
        if (s.chamber != "L" && s.chamber != "R")
          throw Error("step " + std::to_string(id) + ": chamber must be L or R");
        break;
      case StepKind::CompressVacuum:
      case StepKind::ExtractWorkKnownPosition:
        if (!s.apparatus.empty()) p.layout.index_of(s.apparatus);
        break;
      case StepKind::LandauerReset:
      case StepKind::UnitaryResetAttempt:
        p.layout.index_of(s.apparatus);
        break;
      case StepKind::RemovePartition:
      case StepKind::InsertPartition:
        break;
    }
  }
}

namespace {

class Runner {
 public:
  explicit Runner(const Protocol& p) : p_(p), scale_(p.config.particle_scale) {
    bath_.temperature = p.config.temperature;
    sys_axes_ = labels_with_role(p.layout, Role::spin);
    for (const auto& l : labels_with_role(p.layout, Role::position))
      sys_axes_.push_back(l);
    apparatus_axes_ = labels_with_role(p.layout, Role::apparatus);
    result_.ledger.protocol_name = p.name;
    result_.ledger.mode = p.config.mode;
    result_.ledger.seed = p.config.seed;
  }

  RunResult run() {
    validate_protocol(p_);
    for (int cycle = 1; cycle <= p_.config.cycles; ++cycle)
      for (size_t i = 0; i < p_.steps.size(); ++i)
        execute(cycle, static_cast<int>(i) + 1, p_.steps[i]);
    result_.branches = branches_;
    result_.bath = bath_;
    return std::move(result_);
  }

 private:
  const Protocol& p_;
  double scale_;
  std::vector<std::string> sys_axes_;        // spin + position labels
  std::vector<std::string> apparatus_axes_;  // apparatus labels, roster order
  std::vector<Branch> branches_;
  BathModel bath_;
  RunResult result_;
  double prev_s_ext_ = 0.0;
  double s_total_running_ = 0.0;
  bool first_row_ = true;

  DensityState averaged_state() const {
    Matrix m = Matrix::Zero(p_.layout.total_dimension(), p_.layout.total_dimension());
    for (const auto& b : branches_) m += b.probability * b.state.matrix;
    return DensityState(p_.layout, std::move(m));
  }

  void refresh_occupancy(Branch& b) const {
    const auto pos = labels_with_role(p_.layout, Role::position);
    if (pos.size() != 1 || p_.layout.spec(pos[0]).dimension != 2) return;
    const auto q = pointer_distribution(b.state, {pos[0]});
    b.volume.occupancy_l = q.probabilities[0];
    b.volume.occupancy_r = q.probabilities[1];
  }

  // Entropy of the averaged state extended by the classical branch records:
  // group branches by record string, then H(group weights) plus the weighted
  // entropies of the per-group averaged states.
  double extended_entropy() const {
    std::map<std::string, std::pair<double, Matrix>> groups;
    const int d = p_.layout.total_dimension();
    for (const auto& b : branches_) {
      auto& [w, m] = groups.try_emplace(records_key(b), 0.0, Matrix::Zero(d, d)).first->second;
      w += b.probability;
      m += b.probability * b.state.matrix;
    }
    double s = 0.0;
    for (const auto& [key, group] : groups) {
      const auto& [w, m] = group;
      if (w <= 1e-15) continue;
      s += -w * std::log(w) + w * von_neumann_entropy(DensityState(p_.layout, m / w));
    }
    return s;
  }

  // Joint classical distribution over (branch record, pointer values of the
  // listed axes), as a map from composite keys to probabilities. `base_axes`
  // selects which components go into the marginal map.
  void classical_joint(const std::vector<std::string>& axes, bool records_in_base,
                       const std::vector<bool>& axis_in_base,
                       std::map<std::string, double>& full,
                       std::map<std::string, double>& base) const {
    for (const auto& b : branches_) {
      const std::string rec = records_key(b);
      if (axes.empty()) {
        full["r" + rec] += b.probability;
        base[records_in_base ? "r" + rec : std::string{}] += b.probability;
        continue;
      }
      const auto pd = pointer_distribution(b.state, axes);
      for (int flat = 0; flat < pd.size(); ++flat) {
        const double pr = b.probability * pd.probabilities[flat];
        if (pr <= 1e-15) continue;
        const auto sub = pd.unflatten(flat);
        std::vector<int> base_sub;
        for (size_t k = 0; k < axes.size(); ++k)
          if (axis_in_base[k]) base_sub.push_back(sub[k]);
        full["r" + rec + "|" + join_key(sub)] += pr;
        base[(records_in_base ? "r" + rec : std::string{}) + "|" + join_key(base_sub)] += pr;
      }
    }
  }

  // H(system pointer | memory registers, branch records).
  double conditional_column() const {
    if (sys_axes_.empty()) return 0.0;
    std::vector<std::string> axes = sys_axes_;
    std::vector<bool> in_base(sys_axes_.size(), false);
    for (const auto& m : p_.config.memory_labels) {
      axes.push_back(m);
      in_base.push_back(true);
    }
    std::map<std::string, double> full, base;
    classical_joint(axes, true, in_base, full, base);
    const double h = shannon_of_map(full) - shannon_of_map(base);
    return std::max(0.0, h);
  }

  // Erasure cost of register `target` together with the branch records,
  // conditioned on the remaining apparatus registers (correlated side
  // information makes part of the erasure unitarily implementable).
  double erasure_entropy(const std::string& target) const {
    std::vector<std::string> axes = apparatus_axes_;
    if (std::find(axes.begin(), axes.end(), target) == axes.end()) axes.push_back(target);
    std::vector<bool> in_base;
    for (const auto& a : axes) in_base.push_back(a != target);
    std::map<std::string, double> full, base;
    classical_joint(axes, false, in_base, full, base);
    return std::max(0.0, shannon_of_map(full) - shannon_of_map(base));
  }

  void clear_records_and_coalesce() {
    for (auto& b : branches_) b.records.clear();
    std::vector<Branch> merged;
    for (auto& b : branches_) {
      bool absorbed = false;
      for (auto& m : merged) {
        if (m.records == b.records && m.volume.approx_equal(b.volume, 1e-9) &&
            trace_distance(m.state, b.state) < 1e-9) {
          m.probability += b.probability;
          absorbed = true;
          break;
        }
      }
      if (!absorbed) merged.push_back(std::move(b));
    }
    branches_ = std::move(merged);
  }

  void apply_to_all(const UnitaryOp& u) {
    for (auto& b : branches_) {
      b.state = apply_unitary(b.state, u);
      refresh_occupancy(b);
    }
  }

  void dephase(const std::string& label) {
    const auto m = pointer_measurement(p_.layout, label);
    for (auto& b : branches_) b.state = nonselective_measure(b.state, m);
  }

  // Controlled position relabel: for every pointer value of `control` with
  // support, flip the position to L when that sector sits in R. Requires the
  // control to determine the position.
  void conditioned_relabel(int step_id, const std::string& control,
                           const std::string& pos) {
    const int dc = p_.layout.spec(control).dimension;
    for (auto& b : branches_) {
      const auto joint = pointer_distribution(b.state, {control, pos});
      Matrix u = Matrix::Identity(dc * 2, dc * 2);
      for (int a = 0; a < dc; ++a) {
        const double pl = joint.probabilities[joint.flatten({a, 0})];
        const double pr = joint.probabilities[joint.flatten({a, 1})];
        const double pa = pl + pr;
        if (pa <= 1e-8) continue;
        if (pl / pa >= 1.0 - 1e-8) continue;  // already L in this sector
        if (pr / pa < 1.0 - 1e-8)
          throw UnknownPosition("step " + std::to_string(step_id) + ": register " +
                                control + " does not determine the position");
        u(a * 2 + 0, a * 2 + 0) = 0.0;
        u(a * 2 + 1, a * 2 + 1) = 0.0;
        u(a * 2 + 0, a * 2 + 1) = 1.0;
        u(a * 2 + 1, a * 2 + 0) = 1.0;
      }
      b.state = apply_unitary(b.state, UnitaryOp{p_.layout, embed(p_.layout, u, {control, pos})});
      refresh_occupancy(b);
    }
  }

  void execute(int cycle, int step_id, const ProtocolStep& step) {
    std::vector<WorkEntry> entries;
    std::string flag;
    // Per-branch thermodynamic primitives run against a scratch bath; the
    // real bath is credited once per step from the probability-weighted
    // average entry (see emit_rows).
    BathModel scratch;
    scratch.temperature = bath_.temperature;

    switch (step.kind) {
      case StepKind::Prepare: {
        if (cycle == 1) {
          Matrix m = Matrix::Identity(1, 1);
          for (const auto& spec : p_.layout.subsystems()) {
            const auto& prep = step.preparation.at(spec.label);
            Matrix f = Matrix::Zero(spec.dimension, spec.dimension);
            if (prep.kind == FactorPrep::Kind::pointer) {
              const auto& basis = spec.pointer_basis;
              const auto it = std::find(basis.begin(), basis.end(), prep.pointer_name);
              f(it - basis.begin(), it - basis.begin()) = 1.0;
            } else if (prep.kind == FactorPrep::Kind::uniform) {
              f = Matrix::Identity(spec.dimension, spec.dimension) / spec.dimension;
            } else {
              Vector v(spec.dimension);
              for (int k = 0; k < spec.dimension; ++k) v(k) = prep.amplitudes[k];
              const double norm = v.norm();
              if (norm < tol::trace) throw InvalidState("Prepare: zero amplitude vector");
              v /= norm;
              f = v * v.adjoint();
            }
            m = kron(m, f);
          }
          Branch b;
          b.probability = 1.0;
          b.state = DensityState(p_.layout, std::move(m));
          b.volume.volume_l = step.initial_volume_l;
          b.volume.volume_r = step.initial_volume_r;
          refresh_occupancy(b);
          branches_ = {std::move(b)};
          result_.initial_state = averaged_state();
          result_.initial_volume = branches_.front().volume;
          result_.has_initial = true;
        }
        break;  // later cycles: bookkeeping row only
      }

      case StepKind::ApplyUnitary:
        apply_to_all(named_unitary(p_.layout, step));
        break;

      case StepKind::NonSelectiveMeasure: {
        const auto m = step.basis == "x" ? x_measurement(p_.layout, step.target)
                                         : pointer_measurement(p_.layout, step.target);
        for (auto& b : branches_) {
          b.state = nonselective_measure(b.state, m);
          refresh_occupancy(b);
        }
        break;
      }

      case StepKind::SelectiveMeasure: {
        const auto m = step.basis == "x" ? x_measurement(p_.layout, step.target)
                                         : pointer_measurement(p_.layout, step.target);
        if (p_.config.mode == Mode::collapse) {
          std::vector<Branch> next;
          for (const auto& b : branches_) {
            for (const auto& o : selective_measure(b.state, m)) {
              Branch nb;
              nb.probability = b.probability * o.probability;
              nb.state = o.post_state;
              nb.records = b.records;
              nb.records.emplace_back(step_id, o.label);
              nb.volume = b.volume;
              refresh_occupancy(nb);
              next.push_back(std::move(nb));
            }
          }
          branches_ = std::move(next);
        } else {
          if (step.apparatus.empty()) {
            for (auto& b : branches_) {
              b.state = nonselective_measure(b.state, m);
              refresh_occupancy(b);
            }
          } else {
            if (step.basis != "pointer")
              throw StepError(step_id, "apparatus coupling records the pointer basis");
            for (auto& b : branches_)
              b.state = couple_apparatus(b.state, step.target, step.apparatus);
            dephase(step.apparatus);
            for (auto& b : branches_) refresh_occupancy(b);
          }
        }
        break;
      }

      case StepKind::CoupleApparatus: {
        for (auto& b : branches_)
          b.state = couple_apparatus(b.state, step.target, step.apparatus);
        dephase(step.apparatus);
        for (auto& b : branches_) refresh_occupancy(b);
        break;
      }

      case StepKind::Separate: {
        apply_to_all(separation_unitary(p_.layout, step.args[0], step.args[1]));
        if (step.open_twin) {
          for (auto& b : branches_) {
            if (std::abs(b.volume.volume_r) > 1e-12)
              throw StepError(step_id, "twin chamber is already open");
            b.volume.volume_r = b.volume.volume_l;
          }
        }
        break;
      }

      case StepKind::IsothermalVolume: {
        for (auto& b : branches_) {
          if (std::abs(b.volume.volume(step.chamber) - step.v_from) > 1e-9)
            throw StepError(step_id, "chamber " + step.chamber +
                                         " does not have the declared starting volume");
          try {
            entries.push_back(isothermal_volume_change(b.volume, step.chamber, step.v_from,
                                                       step.v_to, step.weight, scratch));
          } catch (const Error& e) {
            throw StepError(step_id, e.what());
          }
        }
        break;
      }

      case StepKind::CompressVacuum: {
        const std::string pos = position_label(p_.layout, step_id);
        bool any_conditioned = false;
        for (auto& b : branches_) {
          const auto q = pointer_distribution(b.state, {pos});
          if (q.probabilities[0] >= 1.0 - tol::ready_mass ||
              q.probabilities[1] >= 1.0 - tol::ready_mass) {
            const bool in_l = q.probabilities[0] >= 1.0 - tol::ready_mass;
            const std::string empty = in_l ? "R" : "L";
            try {
              compress_vacuum(b.volume, empty, scratch);
            } catch (const Error& e) {
              throw StepError(step_id, e.what());
            }
            if (!in_l) {
              Matrix x(2, 2);
              x << 0, 1, 1, 0;
              b.state = apply_unitary(b.state, UnitaryOp{p_.layout, embed(p_.layout, x, {pos})});
              std::swap(b.volume.volume_l, b.volume.volume_r);
            }
            refresh_occupancy(b);
          } else {
            any_conditioned = true;
          }
        }
        if (any_conditioned) {
          if (step.apparatus.empty())
            throw UnknownPosition("step " + std::to_string(step_id) +
                                  ": position is indefinite and no record register given");
          for (auto& b : branches_)
            if (std::abs(b.volume.volume_l - b.volume.volume_r) > 1e-9)
              throw StepError(step_id, "conditioned compression needs equal chamber volumes");
          conditioned_relabel(step_id, step.apparatus, pos);
          for (auto& b : branches_) b.volume.volume_r = 0.0;
          for (auto& b : branches_) refresh_occupancy(b);
        }
        break;
      }

      case StepKind::ExtractWorkKnownPosition: {
        const std::string pos = position_label(p_.layout, step_id);
        for (auto& b : branches_) {
          const auto q = pointer_distribution(b.state, {pos});
          WorkEntry e;
          if (q.probabilities[0] >= 1.0 - tol::ready_mass ||
              q.probabilities[1] >= 1.0 - tol::ready_mass) {
            const bool in_l = q.probabilities[0] >= 1.0 - tol::ready_mass;
            try {
              e = extract_work_known_position(b.volume, scratch, in_l ? "L" : "R");
            } catch (const Error& err) {
              throw StepError(step_id, err.what());
            }
            if (!in_l) {
              Matrix x(2, 2);
              x << 0, 1, 1, 0;
              b.state = apply_unitary(b.state, UnitaryOp{p_.layout, embed(p_.layout, x, {pos})});
              std::swap(b.volume.volume_l, b.volume.volume_r);
            }
          } else {
            if (step.apparatus.empty())
              throw UnknownPosition("step " + std::to_string(step_id) +
                                    ": no position record; extraction refused");
            if (std::abs(b.volume.volume_l - 0.5) > 1e-9 ||
                std::abs(b.volume.volume_r - 0.5) > 1e-9)
              throw StepError(step_id, "work extraction requires the partition at the midpoint");
            e.ds_gas_spatial = kLn2;
            e.heat = bath_.temperature * kLn2;
            e.work = e.heat;
            e.ds_bath = -kLn2;
            b.volume.volume_l = 1.0;
            b.volume.volume_r = 0.0;
          }
          entries.push_back(e);
          refresh_occupancy(b);
        }
        // Conditioned relabel after the per-branch pass so the correlation
        // check sees the pre-extraction state.
        bool indefinite = false;
        for (auto& b : branches_) {
          const auto q = pointer_distribution(b.state, {pos});
          if (q.probabilities[0] < 1.0 - tol::ready_mass) indefinite = true;
        }
        if (indefinite) conditioned_relabel(step_id, step.apparatus, pos);
        break;
      }

      case StepKind::LandauerReset: {
        const double h = erasure_entropy(step.apparatus);
        WorkEntry e;
        e.ds_bath = h;
        e.heat = -bath_.temperature * h;
        e.work = e.heat;
        const auto& spec = p_.layout.spec(step.apparatus);
        std::vector<double> ready(spec.dimension, 0.0);
        ready[0] = 1.0;
        for (auto& b : branches_) b.state = reset_factor(b.state, step.apparatus, ready);
        clear_records_and_coalesce();
        for (auto& b : branches_) refresh_occupancy(b);
        entries.assign(branches_.size(), e);
        break;
      }

      case StepKind::UnitaryResetAttempt: {
        // Distinct (record, pointer value) configurations must map to the one
        // ready state by a single unitary; mutually orthogonal sources with a
        // repeated target make the Gram matrices disagree.
        std::set<std::pair<std::string, int>> configs;
        for (const auto& b : branches_) {
          const auto q = pointer_distribution(b.state, {step.apparatus});
          for (int k = 0; k < q.size(); ++k)
            if (q.probabilities[k] > 1e-9) configs.insert({records_key(b), k});
        }
        const int n = std::max<int>(1, static_cast<int>(configs.size()));
        ResetProblem problem;
        for (int k = 0; k < static_cast<int>(configs.size()); ++k) {
          Vector src = Vector::Zero(n), tgt = Vector::Zero(n);
          src(k) = 1.0;
          tgt(0) = 1.0;
          problem.sources.push_back(src);
          problem.targets.push_back(tgt);
        }
        const auto verdict = unitary_reset_feasible(problem);
        if (!verdict.feasible) {
          if (!p_.config.permit_infeasible_reset)
            throw ResetInfeasible("step " + std::to_string(step_id) +
                                  ": no unitary maps the distinct records of " +
                                  step.apparatus + " to one ready state");
          flag = "NONPHYSICAL";
        }
        const auto& spec = p_.layout.spec(step.apparatus);
        std::vector<double> ready(spec.dimension, 0.0);
        ready[0] = 1.0;
        for (auto& b : branches_) b.state = reset_factor(b.state, step.apparatus, ready);
        clear_records_and_coalesce();
        for (auto& b : branches_) refresh_occupancy(b);
        break;
      }

      case StepKind::RemovePartition: {
        const std::string pos = position_label(p_.layout, step_id);
        for (auto& b : branches_) {
          const double v = b.volume.volume_l + b.volume.volume_r;
          if (v <= 0.0) throw StepError(step_id, "no volume to merge");
          const auto q = pointer_distribution(b.state, {pos});
          WorkEntry e;
          const double vols[2] = {b.volume.volume_l, b.volume.volume_r};
          for (int c = 0; c < 2; ++c) {
            if (q.probabilities[c] <= 1e-12) continue;
            if (vols[c] <= 0.0)
              throw StepError(step_id, "occupied chamber has zero volume");
            e.ds_gas_spatial += step.weight * q.probabilities[c] * std::log(v / vols[c]);
          }
          entries.push_back(e);
          b.state = reset_factor(b.state, pos, {1.0, 0.0});
          b.volume.volume_l = v;
          b.volume.volume_r = 0.0;
          refresh_occupancy(b);
        }
        break;
      }

      case StepKind::InsertPartition: {
        const std::string pos = position_label(p_.layout, step_id);
        for (auto& b : branches_) {
          const auto q = pointer_distribution(b.state, {pos});
          if (q.probabilities[0] < 1.0 - tol::ready_mass)
            throw StepError(step_id, "partition insertion needs the merged chamber (position L)");
          if (std::abs(b.volume.volume_r) > 1e-12)
            throw StepError(step_id, "partition is already present");
          const double v = b.volume.volume_l;
          if (v <= 0.0) throw StepError(step_id, "no volume to split");
          WorkEntry e;
          e.ds_gas_spatial = step.weight * std::log(0.5);
          entries.push_back(e);
          b.state = reset_factor(b.state, pos, {0.5, 0.5});
          b.volume.volume_l = v / 2.0;
          b.volume.volume_r = v / 2.0;
          refresh_occupancy(b);
        }
        break;
      }
    }

    emit_rows(cycle, step_id, step.kind, entries, flag);
  }

  void emit_rows(int cycle, int step_id, StepKind kind, std::vector<WorkEntry>& entries,
                 const std::string& flag) {
    if (entries.empty()) entries.assign(branches_.size(), WorkEntry{});
    if (entries.size() != branches_.size())
      throw NumericalFailure("ledger: entry/branch count mismatch");

    const DensityState avg = averaged_state();
    const double s_joint = scale_ * von_neumann_entropy(avg);
    double s_system = 0.0;
    if (!sys_axes_.empty()) {
      std::set<std::string> keep(sys_axes_.begin(), sys_axes_.end());
      s_system = scale_ * von_neumann_entropy(
                              keep.size() == avg.layout.labels().size()
                                  ? avg
                                  : partial_trace(avg, keep));
    }
    const double h_cond = scale_ * conditional_column();
    const double s_ext = scale_ * extended_entropy();

    WorkEntry avg_entry;
    for (size_t i = 0; i < branches_.size(); ++i) {
      avg_entry.work += branches_[i].probability * entries[i].work;
      avg_entry.heat += branches_[i].probability * entries[i].heat;
      avg_entry.ds_bath += branches_[i].probability * entries[i].ds_bath;
      avg_entry.ds_gas_spatial += branches_[i].probability * entries[i].ds_gas_spatial;
    }

    bath_.receive(-avg_entry.heat);

    const bool baseline = first_row_;
    first_row_ = false;
    const double d_s_ext = baseline ? 0.0 : s_ext - prev_s_ext_;
    const double margin =
        baseline ? 0.0 : d_s_ext + avg_entry.ds_gas_spatial + avg_entry.ds_bath;
    prev_s_ext_ = s_ext;
    s_total_running_ += d_s_ext + avg_entry.ds_gas_spatial + avg_entry.ds_bath;

    std::string flags = flag;
    if (flags != "NONPHYSICAL" && margin < -tol::audit) flags = "VIOLATION";

    const double kb = p_.config.k_b;
    for (size_t i = 0; i < branches_.size(); ++i) {
      const auto& b = branches_[i];
      LedgerRow row;
      row.cycle = cycle;
      row.step_id = step_id;
      row.step_kind = step_kind_name(kind);
      row.branch = std::to_string(i);
      row.probability = b.probability;
      row.s_vn_joint = scale_ * von_neumann_entropy(b.state);
      if (!sys_axes_.empty()) {
        std::set<std::string> keep(sys_axes_.begin(), sys_axes_.end());
        row.s_vn_system = scale_ * von_neumann_entropy(
                                       keep.size() == b.state.layout.labels().size()
                                           ? b.state
                                           : partial_trace(b.state, keep));
      }
      row.h_cond_classical = scale_ * branch_conditional(b);
      row.ds_bath = entries[i].ds_bath;
      row.heat = kb * entries[i].heat;
      row.work = kb * entries[i].work;
      row.ds_spatial = entries[i].ds_gas_spatial;
      row.s_total_running = s_total_running_;
      row.flags = flags;
      result_.ledger.rows.push_back(std::move(row));
    }

    LedgerRow row;
    row.cycle = cycle;
    row.step_id = step_id;
    row.step_kind = step_kind_name(kind);
    row.branch = "AVG";
    row.probability = 1.0;
    row.s_vn_system = s_system;
    row.s_vn_joint = s_joint;
    row.h_cond_classical = h_cond;
    row.ds_bath = avg_entry.ds_bath;
    row.heat = kb * avg_entry.heat;
    row.work = kb * avg_entry.work;
    row.s_total_running = s_total_running_;
    row.flags = flags;
    row.ds_spatial = avg_entry.ds_gas_spatial;
    row.margin = margin;
    result_.ledger.rows.push_back(std::move(row));

    result_.ledger.total_work += kb * avg_entry.work;
    result_.ledger.total_heat += kb * avg_entry.heat;
    result_.ledger.total_ds_bath += avg_entry.ds_bath;
    result_.step_states.push_back(avg);
  }

  double branch_conditional(const Branch& b) const {
    if (sys_axes_.empty()) return 0.0;
    std::vector<std::string> axes = sys_axes_;
    for (const auto& m : p_.config.memory_labels) axes.push_back(m);
    const auto joint = pointer_distribution(b.state, axes);
    std::set<std::string> s_set(sys_axes_.begin(), sys_axes_.end());
    std::set<std::string> m_set(p_.config.memory_labels.begin(),
                                p_.config.memory_labels.end());
    if (m_set.empty()) {
      const auto sys_only = pointer_distribution(b.state, sys_axes_);
      return shannon_entropy(sys_only);
    }
    return classical_conditional_entropy(joint, s_set, m_set);
  }
};

}  // namespace

RunResult run(const Protocol& p) {
  Runner runner(p);
  return runner.run();
}

ClosureVerdict cycle_closure(const RunResult& result) {
  ClosureVerdict v;
  if (!result.has_initial) {
    v.closed = true;
    v.volumes_match = true;
    return v;
  }
  Matrix m = Matrix::Zero(result.initial_state.matrix.rows(),
                          result.initial_state.matrix.cols());
  for (const auto& b : result.branches) m += b.probability * b.state.matrix;
  v.state_distance =
      trace_distance(result.initial_state, DensityState(result.initial_state.layout, m));
  v.volumes_match = true;
  for (const auto& b : result.branches)
    if (!b.volume.approx_equal(result.initial_volume, 1e-9)) v.volumes_match = false;
  v.closed = v.state_distance < 1e-9 && v.volumes_match;
  return v;
}

AuditReport audit(const RunResult& result, const Protocol& p) {
  (void)p;
  AuditReport report;
  for (const auto* row : result.ledger.avg_rows()) {
    if (row->flags == "NONPHYSICAL") {
      report.nonphysical_present = true;
      report.findings.push_back({row->cycle, row->step_id, "NONPHYSICAL", row->margin});
    } else if (row->flags == "VIOLATION") {
      report.findings.push_back({row->cycle, row->step_id, "VIOLATION", row->margin});
    }
  }
  report.closure = cycle_closure(result);
  report.net_work = result.ledger.total_work;
  report.kelvin_planck_violation =
      report.closure.closed && report.net_work > tol::audit;
  return report;
}

}  // namespace qtherm
