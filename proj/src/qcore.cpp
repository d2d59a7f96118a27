#include "qtherm/qcore.hpp"

#include <algorithm>
#include <unordered_set>

namespace qtherm {

std::string role_name(Role r) {
  switch (r) {
    case Role::spin:
      return "spin";
    case Role::position:
      return "position";
    case Role::apparatus:
      return "apparatus";
    case Role::ancilla:
      return "ancilla";
  }
  return "ancilla";
}

Role role_from_name(const std::string& name) {
  if (name == "spin") return Role::spin;
  if (name == "position") return Role::position;
  if (name == "apparatus") return Role::apparatus;
  if (name == "ancilla") return Role::ancilla;
  throw Error("unknown subsystem role: " + name);
}

void SubsystemSpec::check() const {
  if (label.empty()) throw Error("subsystem label must be nonempty");
  const int min_dim = (role == Role::ancilla) ? 1 : 2;
  if (dimension < min_dim)
    throw Error("subsystem " + label + ": dimension must be >= " + std::to_string(min_dim));
  if (static_cast<int>(pointer_basis.size()) != dimension)
    throw Error("subsystem " + label + ": pointer basis size must equal dimension");
  std::unordered_set<std::string> seen;
  for (const auto& name : pointer_basis)
    if (!seen.insert(name).second)
      throw Error("subsystem " + label + ": duplicate pointer state " + name);
}

SystemLayout::SystemLayout(std::vector<SubsystemSpec> subsystems)
    : subsystems_(std::move(subsystems)) {
  std::unordered_set<std::string> seen;
  for (const auto& s : subsystems_) {
    s.check();
    if (!seen.insert(s.label).second)
      throw LayoutConflict("duplicate subsystem label: " + s.label);
    total_dimension_ *= s.dimension;
  }
}

bool SystemLayout::has(const std::string& label) const {
  for (const auto& s : subsystems_)
    if (s.label == label) return true;
  return false;
}

int SystemLayout::index_of(const std::string& label) const {
  for (int i = 0; i < factor_count(); ++i)
    if (subsystems_[i].label == label) return i;
  throw UnknownSubsystem("unknown subsystem: " + label);
}

const SubsystemSpec& SystemLayout::spec(const std::string& label) const {
  return subsystems_[index_of(label)];
}

std::vector<std::string> SystemLayout::labels() const {
  std::vector<std::string> out;
  out.reserve(subsystems_.size());
  for (const auto& s : subsystems_) out.push_back(s.label);
  return out;
}

std::vector<int> SystemLayout::dims() const {
  std::vector<int> out;
  out.reserve(subsystems_.size());
  for (const auto& s : subsystems_) out.push_back(s.dimension);
  return out;
}

std::vector<int> SystemLayout::unflatten(int flat) const {
  std::vector<int> sub(subsystems_.size());
  for (int k = factor_count() - 1; k >= 0; --k) {
    sub[k] = flat % subsystems_[k].dimension;
    flat /= subsystems_[k].dimension;
  }
  return sub;
}

int SystemLayout::flatten(const std::vector<int>& sub) const {
  int flat = 0;
  for (int k = 0; k < factor_count(); ++k) flat = flat * subsystems_[k].dimension + sub[k];
  return flat;
}

bool SystemLayout::operator==(const SystemLayout& other) const {
  if (subsystems_.size() != other.subsystems_.size()) return false;
  for (size_t i = 0; i < subsystems_.size(); ++i) {
    const auto& a = subsystems_[i];
    const auto& b = other.subsystems_[i];
    if (a.label != b.label || a.role != b.role || a.dimension != b.dimension ||
        a.pointer_basis != b.pointer_basis)
      return false;
  }
  return true;
}

SystemLayout concat_layouts(const SystemLayout& a, const SystemLayout& b) {
  for (const auto& s : b.subsystems())
    if (a.has(s.label)) throw LayoutConflict("subsystem label collision: " + s.label);
  auto subs = a.subsystems();
  subs.insert(subs.end(), b.subsystems().begin(), b.subsystems().end());
  return SystemLayout(std::move(subs));
}

void ProjectiveMeasurement::check(const SystemLayout& layout) const {
  const auto& spec = layout.spec(target);
  const int d = spec.dimension;
  if (projectors.empty()) throw InvalidMeasurement("empty projector set on " + target);
  Matrix sum = Matrix::Zero(d, d);
  for (const auto& [name, p] : projectors) {
    if (p.rows() != d || p.cols() != d)
      throw InvalidMeasurement("projector " + name + " has wrong dimension");
    if ((p - p.adjoint()).cwiseAbs().maxCoeff() > tol::herm)
      throw InvalidMeasurement("projector " + name + " is not Hermitian");
    if ((p * p - p).cwiseAbs().maxCoeff() > tol::herm)
      throw InvalidMeasurement("projector " + name + " is not idempotent");
    sum += p;
  }
  for (size_t i = 0; i < projectors.size(); ++i)
    for (size_t j = i + 1; j < projectors.size(); ++j)
      if ((projectors[i].second * projectors[j].second).cwiseAbs().maxCoeff() > tol::herm)
        throw InvalidMeasurement("projectors are not mutually orthogonal");
  if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > tol::herm)
    throw InvalidMeasurement("projectors do not sum to the identity on " + target);
}

DensityState pure_state(const SystemLayout& layout, const Vector& amplitudes) {
  if (amplitudes.size() != layout.total_dimension())
    throw LayoutConflict("amplitude vector does not match layout dimension");
  const double norm = amplitudes.norm();
  if (norm < tol::trace) throw InvalidState("zero amplitude vector");
  Vector v = amplitudes / norm;
  return DensityState(layout, v * v.adjoint());
}

DensityState pointer_state(const SystemLayout& layout,
                           const std::vector<std::string>& names) {
  if (static_cast<int>(names.size()) != layout.factor_count())
    throw LayoutConflict("pointer state needs one name per subsystem");
  std::vector<int> sub(names.size());
  for (int k = 0; k < layout.factor_count(); ++k) {
    const auto& basis = layout.subsystems()[k].pointer_basis;
    auto it = std::find(basis.begin(), basis.end(), names[k]);
    if (it == basis.end())
      throw UnknownSubsystem("no pointer state " + names[k] + " on " +
                             layout.subsystems()[k].label);
    sub[k] = static_cast<int>(it - basis.begin());
  }
  Vector v = Vector::Zero(layout.total_dimension());
  v(layout.flatten(sub)) = 1.0;
  return DensityState(layout, v * v.adjoint());
}

DensityState maximally_mixed(const SystemLayout& layout) {
  const int d = layout.total_dimension();
  return DensityState(layout, Matrix::Identity(d, d) / static_cast<double>(d));
}

DensityState tensor(const DensityState& a, const DensityState& b) {
  SystemLayout layout = concat_layouts(a.layout, b.layout);
  const int da = a.matrix.rows(), db = b.matrix.rows();
  Matrix m(da * db, da * db);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < da; ++j) m.block(i * db, j * db, db, db) = a.matrix(i, j) * b.matrix;
  return DensityState(std::move(layout), std::move(m));
}

DensityState partial_trace(const DensityState& rho, const std::set<std::string>& keep) {
  if (keep.empty()) throw UnknownSubsystem("partial_trace: empty keep set");
  const auto& layout = rho.layout;
  for (const auto& l : keep) layout.index_of(l);  // throws on unknown label

  std::vector<SubsystemSpec> kept_specs;
  std::vector<int> kept_idx, traced_idx;
  for (int k = 0; k < layout.factor_count(); ++k) {
    if (keep.count(layout.subsystems()[k].label)) {
      kept_specs.push_back(layout.subsystems()[k]);
      kept_idx.push_back(k);
    } else {
      traced_idx.push_back(k);
    }
  }
  SystemLayout out_layout(kept_specs);
  const int dk = out_layout.total_dimension();
  int dt = 1;
  for (int k : traced_idx) dt *= layout.subsystems()[k].dimension;

  Matrix out = Matrix::Zero(dk, dk);
  std::vector<int> sub_row(layout.factor_count()), sub_col(layout.factor_count());
  for (int i = 0; i < dk; ++i) {
    const auto ki = out_layout.unflatten(i);
    for (int j = 0; j < dk; ++j) {
      const auto kj = out_layout.unflatten(j);
      Complex acc = 0.0;
      for (int t = 0; t < dt; ++t) {
        int rem = t;
        for (int q = static_cast<int>(traced_idx.size()) - 1; q >= 0; --q) {
          const int k = traced_idx[q];
          const int d = layout.subsystems()[k].dimension;
          sub_row[k] = rem % d;
          sub_col[k] = rem % d;
          rem /= d;
        }
        for (size_t q = 0; q < kept_idx.size(); ++q) {
          sub_row[kept_idx[q]] = ki[q];
          sub_col[kept_idx[q]] = kj[q];
        }
        acc += rho.matrix(layout.flatten(sub_row), layout.flatten(sub_col));
      }
      out(i, j) = acc;
    }
  }
  return DensityState(std::move(out_layout), std::move(out));
}

DensityState apply_unitary(const DensityState& rho, const UnitaryOp& u) {
  if (!(rho.layout == u.layout)) throw LayoutConflict("apply_unitary: layout mismatch");
  const int d = rho.matrix.rows();
  if ((u.matrix * u.matrix.adjoint() - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() >
      tol::unitary)
    throw NotUnitary("apply_unitary: matrix is not unitary");
  return DensityState(rho.layout, u.matrix * rho.matrix * u.matrix.adjoint());
}

ValidationReport validate(const DensityState& rho) {
  ValidationReport rep;
  rep.herm_defect = (rho.matrix - rho.matrix.adjoint()).cwiseAbs().maxCoeff();
  rep.trace_defect = std::abs(rho.matrix.trace().real() - 1.0) +
                     std::abs(rho.matrix.trace().imag());
  Matrix herm = 0.5 * (rho.matrix + rho.matrix.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(herm, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalFailure("eigensolver failed");
  rep.min_eigenvalue = solver.eigenvalues().minCoeff();
  rep.passed = rep.herm_defect <= tol::herm && rep.trace_defect <= tol::trace &&
               rep.min_eigenvalue >= -tol::psd;
  return rep;
}

double trace_distance(const DensityState& a, const DensityState& b) {
  if (!(a.layout == b.layout)) throw LayoutConflict("trace_distance: layout mismatch");
  Matrix diff = 0.5 * ((a.matrix - b.matrix) + (a.matrix - b.matrix).adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(diff, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalFailure("eigensolver failed");
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

std::vector<double> spectrum(const DensityState& rho) {
  Matrix herm = 0.5 * (rho.matrix + rho.matrix.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(herm, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw NumericalFailure("spectrum: eigensolver did not converge");
  std::vector<double> eigs(solver.eigenvalues().data(),
                           solver.eigenvalues().data() + solver.eigenvalues().size());
  std::sort(eigs.begin(), eigs.end(), std::greater<double>());
  for (double& w : eigs) {
    if (w < 0.0) {
      if (w < -tol::psd) throw InvalidState("spectrum: eigenvalue below -psd tolerance");
      w = 0.0;
    }
    w = std::min(w, 1.0);
  }
  return eigs;
}

Matrix embed(const SystemLayout& layout, const Matrix& op,
             const std::vector<std::string>& op_labels) {
  std::vector<int> op_idx;
  int d_op = 1;
  for (const auto& l : op_labels) {
    const int k = layout.index_of(l);
    op_idx.push_back(k);
    d_op *= layout.subsystems()[k].dimension;
  }
  if (op.rows() != d_op || op.cols() != d_op)
    throw LayoutConflict("embed: operator dimension does not match listed factors");

  const int d = layout.total_dimension();
  Matrix out = Matrix::Zero(d, d);
  // Sub-index of i restricted to op factors, flattened in op_labels order.
  auto op_part = [&](const std::vector<int>& sub) {
    int flat = 0;
    for (int k : op_idx) flat = flat * layout.subsystems()[k].dimension + sub[k];
    return flat;
  };
  for (int i = 0; i < d; ++i) {
    const auto si = layout.unflatten(i);
    for (int j = 0; j < d; ++j) {
      const auto sj = layout.unflatten(j);
      bool rest_equal = true;
      for (int k = 0; k < layout.factor_count(); ++k) {
        if (std::find(op_idx.begin(), op_idx.end(), k) != op_idx.end()) continue;
        if (si[k] != sj[k]) {
          rest_equal = false;
          break;
        }
      }
      if (rest_equal) out(i, j) = op(op_part(si), op_part(sj));
    }
  }
  return out;
}

ProjectiveMeasurement pointer_measurement(const SystemLayout& layout,
                                          const std::string& target) {
  const auto& spec = layout.spec(target);
  ProjectiveMeasurement m;
  m.target = target;
  for (int i = 0; i < spec.dimension; ++i) {
    Matrix p = Matrix::Zero(spec.dimension, spec.dimension);
    p(i, i) = 1.0;
    m.projectors.emplace_back(spec.pointer_basis[i], std::move(p));
  }
  return m;
}

ProjectiveMeasurement x_measurement(const SystemLayout& layout, const std::string& target) {
  const auto& spec = layout.spec(target);
  if (spec.dimension != 2) throw InvalidMeasurement("x-basis measurement needs a qubit");
  ProjectiveMeasurement m;
  m.target = target;
  Matrix plus(2, 2), minus(2, 2);
  plus << 0.5, 0.5, 0.5, 0.5;
  minus << 0.5, -0.5, -0.5, 0.5;
  m.projectors.emplace_back("+x", plus);
  m.projectors.emplace_back("-x", minus);
  return m;
}

}  // namespace qtherm
