#ifndef QTHERM_QCORE_HPP
#define QTHERM_QCORE_HPP

#include <Eigen/Dense>
#include <complex>
#include <set>
#include <string>
#include <vector>

#include "qtherm/errors.hpp"

namespace qtherm {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Numerical tolerances. Dimensions stay tiny (<= 24), so these sit far
// below any physical quantity the simulator compares.
namespace tol {
inline constexpr double herm = 1e-10;
inline constexpr double trace = 1e-10;
inline constexpr double unitary = 1e-10;
inline constexpr double psd = 1e-10;
inline constexpr double eig = 1e-9;
inline constexpr double ready_mass = 1e-8;
inline constexpr double audit = 1e-8;
}  // namespace tol

enum class Role { spin, position, apparatus, ancilla };

std::string role_name(Role r);
Role role_from_name(const std::string& name);

struct SubsystemSpec {
  std::string label;
  Role role = Role::ancilla;
  int dimension = 2;
  std::vector<std::string> pointer_basis;

  void check() const;
};

// Ordered roster of subsystems. The roster order fixes the tensor factor
// order; all matrices live in the row-major lexicographic product basis.
class SystemLayout {
 public:
  SystemLayout() = default;
  explicit SystemLayout(std::vector<SubsystemSpec> subsystems);

  const std::vector<SubsystemSpec>& subsystems() const { return subsystems_; }
  int total_dimension() const { return total_dimension_; }
  int factor_count() const { return static_cast<int>(subsystems_.size()); }

  bool has(const std::string& label) const;
  int index_of(const std::string& label) const;  // throws UnknownSubsystem
  const SubsystemSpec& spec(const std::string& label) const;

  std::vector<std::string> labels() const;
  std::vector<int> dims() const;

  // Decompose a flat product-basis index into per-factor indices.
  std::vector<int> unflatten(int flat) const;
  int flatten(const std::vector<int>& sub) const;

  bool operator==(const SystemLayout& other) const;

 private:
  std::vector<SubsystemSpec> subsystems_;
  int total_dimension_ = 1;
};

SystemLayout concat_layouts(const SystemLayout& a, const SystemLayout& b);

struct DensityState {
  SystemLayout layout;
  Matrix matrix;

  DensityState() = default;
  DensityState(SystemLayout l, Matrix m) : layout(std::move(l)), matrix(std::move(m)) {}
};

struct UnitaryOp {
  SystemLayout layout;
  Matrix matrix;
};

struct ProjectiveMeasurement {
  std::string target;
  std::vector<std::pair<std::string, Matrix>> projectors;  // on the target factor

  void check(const SystemLayout& layout) const;
};

struct ValidationReport {
  double herm_defect = 0.0;
  double min_eigenvalue = 0.0;
  double trace_defect = 0.0;
  bool passed = false;
};

// State constructors.
DensityState pure_state(const SystemLayout& layout, const Vector& amplitudes);
DensityState pointer_state(const SystemLayout& layout,
                           const std::vector<std::string>& names);
DensityState maximally_mixed(const SystemLayout& layout);

// Core operations.
DensityState tensor(const DensityState& a, const DensityState& b);
DensityState partial_trace(const DensityState& rho, const std::set<std::string>& keep);
DensityState apply_unitary(const DensityState& rho, const UnitaryOp& u);
ValidationReport validate(const DensityState& rho);
double trace_distance(const DensityState& a, const DensityState& b);
std::vector<double> spectrum(const DensityState& rho);  // descending, clamped to [0,1]

// Lift an operator acting on the listed factors (in that order, factors need
// not be adjacent) to the full product space.
Matrix embed(const SystemLayout& layout, const Matrix& op,
             const std::vector<std::string>& op_labels);

// Pointer-basis measurement of one subsystem (rank-1 projectors in roster order).
ProjectiveMeasurement pointer_measurement(const SystemLayout& layout,
                                          const std::string& target);
// Qubit x-basis measurement (outcomes "+x"/"-x").
ProjectiveMeasurement x_measurement(const SystemLayout& layout, const std::string& target);

}  // namespace qtherm

#endif
