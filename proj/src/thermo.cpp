#include "qtherm/thermo.hpp"

#include <cmath>

#include "qtherm/entropy.hpp"

namespace qtherm {

double& VolumeRegister::volume(const std::string& chamber) {
  if (chamber == "L") return volume_l;
  if (chamber == "R") return volume_r;
  throw UnknownSubsystem("unknown chamber: " + chamber);
}

double& VolumeRegister::occupancy(const std::string& chamber) {
  if (chamber == "L") return occupancy_l;
  if (chamber == "R") return occupancy_r;
  throw UnknownSubsystem("unknown chamber: " + chamber);
}

double VolumeRegister::volume(const std::string& chamber) const {
  return const_cast<VolumeRegister*>(this)->volume(chamber);
}

double VolumeRegister::occupancy(const std::string& chamber) const {
  return const_cast<VolumeRegister*>(this)->occupancy(chamber);
}

bool VolumeRegister::approx_equal(const VolumeRegister& other, double tol) const {
  return std::abs(volume_l - other.volume_l) <= tol &&
         std::abs(volume_r - other.volume_r) <= tol &&
         std::abs(occupancy_l - other.occupancy_l) <= tol &&
         std::abs(occupancy_r - other.occupancy_r) <= tol;
}

WorkEntry isothermal_volume_change(VolumeRegister& reg, const std::string& chamber,
                                   double v_from, double v_to, double weight,
                                   BathModel& bath) {
  if (v_from <= 0.0 || v_from > 1.0 + 1e-12 || v_to < 0.0 || v_to > 1.0 + 1e-12)
    throw Error("isothermal volume change: fractions must lie in (0, 1]");
  WorkEntry e;
  if (weight == 0.0) {  // empty chamber: reassigning volume is free
    reg.volume(chamber) = v_to;
    return e;
  }
  if (v_to <= 0.0) throw Singularity("cannot compress an occupied chamber to zero volume");
  if (reg.occupancy(chamber) <= 0.0)
    throw EmptyChamber("chamber " + chamber + " is empty; use compress_vacuum");
  e.ds_gas_spatial = weight * std::log(v_to / v_from);
  e.heat = bath.temperature * e.ds_gas_spatial;
  e.work = e.heat;
  e.ds_bath = -e.ds_gas_spatial;
  bath.receive(-e.heat);
  reg.volume(chamber) = v_to;
  return e;
}

WorkEntry compress_vacuum(VolumeRegister& reg, const std::string& empty_chamber,
                          BathModel& bath) {
  (void)bath;
  if (reg.occupancy(empty_chamber) > 0.0)
    throw OccupiedChamber("chamber " + empty_chamber + " is occupied");
  reg.volume(empty_chamber) = 0.0;  // occupied chamber keeps its volume
  return WorkEntry{};
}

WorkEntry extract_work_known_position(VolumeRegister& reg, BathModel& bath,
                                      const std::string& occupied_chamber) {
  if (reg.occupancy(occupied_chamber) < 1.0 - 1e-9)
    throw UnknownPosition("no reliable record of the particle being in " +
                          occupied_chamber);
  if (std::abs(reg.volume_l - 0.5) > 1e-9 || std::abs(reg.volume_r - 0.5) > 1e-9)
    throw Error("work extraction requires the partition at the midpoint");
  WorkEntry e;
  e.ds_gas_spatial = std::log(2.0);
  e.heat = bath.temperature * std::log(2.0);
  e.work = e.heat;
  e.ds_bath = -std::log(2.0);
  bath.receive(-e.heat);
  reg.volume(occupied_chamber) = 1.0;
  reg.volume(occupied_chamber == "L" ? "R" : "L") = 0.0;
  return e;
}

WorkEntry landauer_cost(const std::vector<double>& record_distribution, BathModel& bath) {
  const double h = shannon_of(record_distribution);
  WorkEntry e;
  e.ds_bath = h;
  e.heat = -bath.temperature * h;  // heat leaves the system side
  e.work = e.heat;                 // paid from the work store
  bath.receive(bath.temperature * h);
  return e;
}

}  // namespace qtherm
