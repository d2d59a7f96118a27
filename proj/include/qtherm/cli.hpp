#ifndef QTHERM_CLI_HPP
#define QTHERM_CLI_HPP

#include <optional>
#include <ostream>
#include <string>

#include "qtherm/engine.hpp"

namespace qtherm::cli {

// Command-line overrides layered onto a protocol's own config.
struct Overrides {
  std::optional<Mode> mode;
  std::optional<double> temperature;
  std::optional<double> k_b;
  std::optional<int> cycles;
  std::optional<std::uint64_t> seed;
  std::optional<ResetKind> reset;
  bool permit_infeasible_reset = false;
  double w1_squared = 0.5;  // builtin:vn-cycle only
  double n_particles = 1.0;
};

// Resolves "builtin:<name>" or a protocol file path, then applies overrides.
Protocol load_protocol(const std::string& source, const Overrides& o);

void write_csv(std::ostream& out, const Ledger& ledger);

// Exit codes: 0 ok, 2 parse error, 3 validation error, 4 step error,
// 10 VIOLATION verdict, 11 NONPHYSICAL-only verdict.
int cmd_run(const std::string& source, const Overrides& o, std::ostream& out,
            std::ostream& err);
int cmd_audit(const std::string& source, const Overrides& o, std::ostream& out,
              std::ostream& err);
int cmd_compare(const std::string& source, const Overrides& o, std::ostream& out,
                std::ostream& err);

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qtherm::cli

#endif
