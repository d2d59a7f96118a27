#include "qtherm/channels.hpp"

#include <cmath>

#include "qtherm/entropy.hpp"

namespace qtherm {

DensityState nonselective_measure(const DensityState& rho, const ProjectiveMeasurement& m) {
  m.check(rho.layout);
  Matrix out = Matrix::Zero(rho.matrix.rows(), rho.matrix.cols());
  for (const auto& [name, p] : m.projectors) {
    Matrix lifted = embed(rho.layout, p, {m.target});
    out += lifted * rho.matrix * lifted;
  }
  return DensityState(rho.layout, std::move(out));
}

std::vector<Outcome> selective_measure(const DensityState& rho,
                                       const ProjectiveMeasurement& m) {
  m.check(rho.layout);
  std::vector<Outcome> outcomes;
  for (const auto& [name, p] : m.projectors) {
    Matrix lifted = embed(rho.layout, p, {m.target});
    Matrix post = lifted * rho.matrix * lifted;
    const double prob = post.trace().real();
    if (prob < tol::trace) continue;
    outcomes.push_back({name, prob, DensityState(rho.layout, post / prob)});
  }
  return outcomes;
}

UnitaryOp coupling_unitary(const SystemLayout& layout, const std::string& source,
                           const std::string& apparatus) {
  const auto& src = layout.spec(source);
  const auto& app = layout.spec(apparatus);
  if (app.dimension < src.dimension)
    throw LayoutConflict("apparatus " + apparatus + " too small to record " + source);
  const int shift = (app.dimension > src.dimension) ? 1 : 0;

  const int ds = src.dimension, dm = app.dimension;
  Matrix u = Matrix::Zero(ds * dm, ds * dm);
  for (int i = 0; i < ds; ++i) {
    const int record = i + shift;
    for (int a = 0; a < dm; ++a) {
      int image = a;
      if (a == 0)
        image = record;  // ready -> record
      else if (a == record)
        image = 0;
      u(i * dm + image, i * dm + a) = 1.0;
    }
  }
  return UnitaryOp{layout, embed(layout, u, {source, apparatus})};
}

DensityState couple_apparatus(const DensityState& rho, const std::string& source,
                              const std::string& apparatus) {
  const auto ready = pointer_distribution(rho, {apparatus});
  if (ready.probabilities[0] < 1.0 - tol::ready_mass)
    throw ApparatusNotReady("apparatus " + apparatus + " is not in its ready state");
  return apply_unitary(rho, coupling_unitary(rho.layout, source, apparatus));
}

UnitaryOp separation_unitary(const SystemLayout& layout, const std::string& spin,
                             const std::string& position) {
  if (layout.spec(spin).dimension != 2 || layout.spec(position).dimension != 2)
    throw LayoutConflict("separation needs 2-dimensional spin and position factors");
  Matrix u = Matrix::Identity(4, 4);
  // |-z> sector: swap L and R.
  u(2, 2) = 0.0;
  u(3, 3) = 0.0;
  u(2, 3) = 1.0;
  u(3, 2) = 1.0;
  return UnitaryOp{layout, embed(layout, u, {spin, position})};
}

FeasibilityVerdict unitary_reset_feasible(const ResetProblem& p) {
  if (p.sources.size() != p.targets.size())
    throw Error("reset problem: source and target counts differ");
  FeasibilityVerdict verdict;
  const size_t n = p.sources.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      const Complex gs = p.sources[i].dot(p.sources[j]);
      const Complex gt = p.targets[i].dot(p.targets[j]);
      verdict.max_gram_discrepancy =
          std::max(verdict.max_gram_discrepancy, std::abs(gs - gt));
    }
  verdict.feasible = verdict.max_gram_discrepancy <= tol::eig;
  return verdict;
}

}  // namespace qtherm
