#include "qtherm/entropy.hpp"

#include <cmath>

namespace qtherm {

std::vector<int> PointerDistribution::unflatten(int flat) const {
  std::vector<int> sub(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    sub[k] = flat % dims[k];
    flat /= dims[k];
  }
  return sub;
}

int PointerDistribution::flatten(const std::vector<int>& sub) const {
  int flat = 0;
  for (size_t k = 0; k < dims.size(); ++k) flat = flat * dims[k] + sub[k];
  return flat;
}

void PointerDistribution::check() const {
  double total = 0.0;
  for (double p : probabilities) {
    if (p < -tol::psd) throw InvalidDistribution("negative probability entry");
    total += std::max(p, 0.0);
  }
  if (std::abs(total - 1.0) > tol::trace)
    throw InvalidDistribution("probabilities do not sum to 1");
}

double shannon_of(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p < -tol::psd) throw InvalidDistribution("negative probability entry");
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double von_neumann_entropy(const DensityState& rho) {
  if (!validate(rho).passed) throw InvalidState("von_neumann_entropy: invalid state");
  return shannon_of(spectrum(rho));
}

double shannon_entropy(const PointerDistribution& p) {
  p.check();
  return shannon_of(p.probabilities);
}

PointerDistribution pointer_distribution(const DensityState& rho,
                                         const std::vector<std::string>& axes) {
  std::set<std::string> keep(axes.begin(), axes.end());
  DensityState reduced = partial_trace(rho, keep);
  // Reorder to the requested axis order (partial_trace keeps roster order).
  PointerDistribution out;
  out.axes = axes;
  for (const auto& a : axes) {
    const auto& spec = rho.layout.spec(a);
    out.dims.push_back(spec.dimension);
    out.outcome_names.push_back(spec.pointer_basis);
  }
  int n = 1;
  for (int d : out.dims) n *= d;
  out.probabilities.assign(n, 0.0);
  for (int flat = 0; flat < n; ++flat) {
    const auto sub = out.unflatten(flat);
    // Map requested-axis sub-indices onto the reduced layout's roster order.
    std::vector<int> reduced_sub(reduced.layout.factor_count());
    for (size_t k = 0; k < axes.size(); ++k)
      reduced_sub[reduced.layout.index_of(axes[k])] = sub[k];
    double p = reduced.matrix(reduced.layout.flatten(reduced_sub),
                              reduced.layout.flatten(reduced_sub))
                   .real();
    out.probabilities[flat] = std::max(p, 0.0);
  }
  return out;
}

double quantum_conditional_entropy(const DensityState& rho,
                                   const std::set<std::string>& s_labels,
                                   const std::set<std::string>& m_labels) {
  if (s_labels.empty() || m_labels.empty())
    throw LayoutConflict("conditional entropy needs nonempty label sets");
  for (const auto& l : s_labels)
    if (m_labels.count(l)) throw LayoutConflict("overlapping S and M labels: " + l);
  std::set<std::string> joint = s_labels;
  joint.insert(m_labels.begin(), m_labels.end());
  const double s_joint = von_neumann_entropy(partial_trace(rho, joint));
  const double s_m = von_neumann_entropy(partial_trace(rho, m_labels));
  return s_joint - s_m;
}

double classical_conditional_entropy(const PointerDistribution& joint,
                                     const std::set<std::string>& s_axes,
                                     const std::set<std::string>& m_axes) {
  joint.check();
  for (const auto& a : joint.axes)
    if (!s_axes.count(a) && !m_axes.count(a))
      throw LayoutConflict("axis " + a + " not covered by S or M");
  for (const auto& a : s_axes)
    if (m_axes.count(a)) throw LayoutConflict("overlapping S and M axes: " + a);

  std::vector<int> m_idx;
  for (size_t k = 0; k < joint.axes.size(); ++k)
    if (m_axes.count(joint.axes[k])) m_idx.push_back(static_cast<int>(k));

  // Marginal over M, keyed by the M sub-indices.
  auto m_key = [&](const std::vector<int>& sub) {
    int key = 0;
    for (int k : m_idx) key = key * joint.dims[k] + sub[k];
    return key;
  };
  int m_size = 1;
  for (int k : m_idx) m_size *= joint.dims[k];
  std::vector<double> pm(m_size, 0.0);
  for (int flat = 0; flat < joint.size(); ++flat)
    pm[m_key(joint.unflatten(flat))] += std::max(joint.probabilities[flat], 0.0);

  double h = 0.0;
  for (int flat = 0; flat < joint.size(); ++flat) {
    const double psm = std::max(joint.probabilities[flat], 0.0);
    if (psm <= 0.0) continue;
    const double m = pm[m_key(joint.unflatten(flat))];
    if (m <= 0.0) continue;  // measure-zero slice contributes nothing
    h -= psm * std::log(psm / m);
  }
  return std::max(h, 0.0);
}

EntropySnapshot snapshot(const DensityState& rho, const std::set<std::string>& s_labels,
                         const std::set<std::string>& m_labels) {
  EntropySnapshot snap;
  std::set<std::string> joint = s_labels;
  joint.insert(m_labels.begin(), m_labels.end());
  snap.joint = von_neumann_entropy(partial_trace(rho, joint));
  double s_s = 0.0, s_m = 0.0;
  for (const auto& l : s_labels) {
    const double s = von_neumann_entropy(partial_trace(rho, {l}));
    snap.marginals[l] = s;
  }
  for (const auto& l : m_labels) {
    const double s = von_neumann_entropy(partial_trace(rho, {l}));
    snap.marginals[l] = s;
  }
  s_s = von_neumann_entropy(partial_trace(rho, s_labels));
  s_m = von_neumann_entropy(partial_trace(rho, m_labels));
  snap.conditional_s_given_m = snap.joint - s_m;
  snap.conditional_m_given_s = snap.joint - s_s;
  snap.mutual_information = s_s + s_m - snap.joint;
  return snap;
}

}  // namespace qtherm
