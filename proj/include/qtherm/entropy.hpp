#ifndef QTHERM_ENTROPY_HPP
#define QTHERM_ENTROPY_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "qtherm/qcore.hpp"

namespace qtherm {

// All entropies are in k_B * nats with k_B = 1; callers rescale.

struct EntropySnapshot {
  double joint = 0.0;
  std::map<std::string, double> marginals;
  double conditional_s_given_m = 0.0;
  double conditional_m_given_s = 0.0;
  double mutual_information = 0.0;
};

// Probability table over the product of pointer bases of the listed axes,
// stored flat in row-major roster order.
struct PointerDistribution {
  std::vector<std::string> axes;
  std::vector<int> dims;
  std::vector<std::vector<std::string>> outcome_names;  // per axis
  std::vector<double> probabilities;                    // flat, row-major

  int size() const { return static_cast<int>(probabilities.size()); }
  std::vector<int> unflatten(int flat) const;
  int flatten(const std::vector<int>& sub) const;
  void check() const;  // normalization and positivity, clamps small negatives
};

double von_neumann_entropy(const DensityState& rho);
double shannon_entropy(const PointerDistribution& p);
PointerDistribution pointer_distribution(const DensityState& rho,
                                         const std::vector<std::string>& axes);
double quantum_conditional_entropy(const DensityState& rho,
                                   const std::set<std::string>& s_labels,
                                   const std::set<std::string>& m_labels);
double classical_conditional_entropy(const PointerDistribution& joint,
                                     const std::set<std::string>& s_axes,
                                     const std::set<std::string>& m_axes);
EntropySnapshot snapshot(const DensityState& rho, const std::set<std::string>& s_labels,
                         const std::set<std::string>& m_labels);

// -sum p ln p with 0 ln 0 := 0, clamping entries in (-psd, 0) to zero.
double shannon_of(const std::vector<double>& probs);

}  // namespace qtherm

#endif
