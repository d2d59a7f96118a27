#ifndef QTHERM_THERMO_HPP
#define QTHERM_THERMO_HPP

#include <string>
#include <vector>

#include "qtherm/errors.hpp"

namespace qtherm {

// Single isothermal heat bath. Entropy in k_B nats, heat in energy units
// (k_B = 1 internally; the CLI rescales on output).
struct BathModel {
  double temperature = 1.0;
  double cumulative_entropy = 0.0;  // total entropy received by the bath
  double cumulative_heat = 0.0;     // total heat received by the bath

  void receive(double heat) {
    cumulative_heat += heat;
    cumulative_entropy += heat / temperature;
  }
  bool self_consistent() const {
    return std::abs(cumulative_entropy * temperature - cumulative_heat) <= 1e-9;
  }
};

// Occupancy and volume fraction per chamber. Fractions are relative to the
// reference box volume; the merged box has fraction 1.
struct VolumeRegister {
  double volume_l = 1.0;
  double volume_r = 0.0;
  double occupancy_l = 1.0;
  double occupancy_r = 0.0;

  double& volume(const std::string& chamber);
  double& occupancy(const std::string& chamber);
  double volume(const std::string& chamber) const;
  double occupancy(const std::string& chamber) const;

  bool approx_equal(const VolumeRegister& other, double tol = 1e-9) const;
};

// Sign conventions: W > 0 is work extracted to an external store, Q > 0 is
// heat flowing bath -> system, dS_bath = -Q / T.
struct WorkEntry {
  double work = 0.0;
  double heat = 0.0;
  double ds_bath = 0.0;
  double ds_gas_spatial = 0.0;
};

struct WorkLedger {
  double cumulative_work_extracted = 0.0;
  std::vector<WorkEntry> entries;

  void add(const WorkEntry& e) {
    entries.push_back(e);
    cumulative_work_extracted += e.work;
  }
};

// Quasi-static isothermal volume change of an occupied chamber. `weight` is
// the number of particles riding the change (N w^2 for the gas cycle).
WorkEntry isothermal_volume_change(VolumeRegister& reg, const std::string& chamber,
                                   double v_from, double v_to, double weight,
                                   BathModel& bath);

// Zero-cost compression of an empty chamber to zero volume; the occupied
// chamber keeps its own volume fraction.
WorkEntry compress_vacuum(VolumeRegister& reg, const std::string& empty_chamber,
                          BathModel& bath);

// kT ln 2 extraction against the partition, gated on a position record.
// Requires both fractions at 1/2; the occupied chamber expands to 1.
WorkEntry extract_work_known_position(VolumeRegister& reg, BathModel& bath,
                                      const std::string& occupied_chamber);

// Landauer erasure of a record with pointer distribution q: the bath gains
// the Shannon entropy of q, paid for by work.
WorkEntry landauer_cost(const std::vector<double>& record_distribution, BathModel& bath);

}  // namespace qtherm

#endif
