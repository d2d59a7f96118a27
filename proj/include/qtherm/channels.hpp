#ifndef QTHERM_CHANNELS_HPP
#define QTHERM_CHANNELS_HPP

#include <string>
#include <vector>

#include "qtherm/qcore.hpp"

namespace qtherm {

struct Outcome {
  std::string label;
  double probability = 0.0;
  DensityState post_state;
};

struct ResetProblem {
  std::vector<Vector> sources;
  std::vector<Vector> targets;
};

struct FeasibilityVerdict {
  bool feasible = false;
  double max_gram_discrepancy = 0.0;
};

// rho -> sum_i P_i rho P_i with projectors lifted onto the target factor.
DensityState nonselective_measure(const DensityState& rho, const ProjectiveMeasurement& m);

// Outcomes with probability below tol::trace are omitted.
std::vector<Outcome> selective_measure(const DensityState& rho,
                                       const ProjectiveMeasurement& m);

// Correlating unitary |s_i>|ready> -> |s_i>|r_i>. The ready state is pointer
// index 0 of the apparatus; records map index-to-index (shifted past `ready`
// when the apparatus has a spare dimension for it).
DensityState couple_apparatus(const DensityState& rho, const std::string& source,
                              const std::string& apparatus);
UnitaryOp coupling_unitary(const SystemLayout& layout, const std::string& source,
                           const std::string& apparatus);

// Identity on |+z> x (.), L<->R swap on |-z> x (.). Spin pointer index 0 is
// treated as +z, position indices as {L, R}.
UnitaryOp separation_unitary(const SystemLayout& layout, const std::string& spin,
                             const std::string& position);

// Feasible iff the source and target Gram matrices agree entry-wise.
FeasibilityVerdict unitary_reset_feasible(const ResetProblem& p);

}  // namespace qtherm

#endif
