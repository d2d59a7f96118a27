#include "qtherm/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qtherm/protocol_io.hpp"

namespace qtherm::cli {

namespace {

std::string num(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;  // snap display noise, keep 12-digit payload
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string verdict_of(const AuditReport& report) {
  bool violation = report.kelvin_planck_violation;
  for (const auto& f : report.findings)
    if (f.kind == "VIOLATION") violation = true;
  if (violation) return "VIOLATION";
  if (report.nonphysical_present) return "NONPHYSICAL";
  return "CLEAN";
}

int exit_code_of(const AuditReport& report) {
  const std::string v = verdict_of(report);
  if (v == "VIOLATION") return 10;
  if (v == "NONPHYSICAL") return 11;
  return 0;
}

}  // namespace

Protocol load_protocol(const std::string& source, const Overrides& o) {
  Protocol p;
  if (source.rfind("builtin:", 0) == 0) {
    p = make_builtin(source, o.reset.value_or(ResetKind::landauer), o.w1_squared,
                     o.n_particles);
  } else {
    p = load_protocol_file(source);
  }
  if (o.mode) p.config.mode = *o.mode;
  if (o.temperature) p.config.temperature = *o.temperature;
  if (o.k_b) p.config.k_b = *o.k_b;
  if (o.cycles) p.config.cycles = *o.cycles;
  if (o.seed) p.config.seed = *o.seed;
  if (o.permit_infeasible_reset) p.config.permit_infeasible_reset = true;
  return p;
}

void write_csv(std::ostream& out, const Ledger& ledger) {
  out << "# protocol=" << ledger.protocol_name << " mode=" << mode_name(ledger.mode)
      << " seed=" << ledger.seed << "\n";
  out << "cycle,step_id,step_kind,branch,probability,S_vN_system,S_vN_joint,"
         "H_cond_classical,dS_bath,Q,W,S_total_running,flags\n";
  for (const auto& r : ledger.rows) {
    out << r.cycle << ',' << r.step_id << ',' << r.step_kind << ',' << r.branch << ','
        << num(r.probability) << ',' << num(r.s_vn_system) << ',' << num(r.s_vn_joint)
        << ',' << num(r.h_cond_classical) << ',' << num(r.ds_bath) << ',' << num(r.heat)
        << ',' << num(r.work) << ',' << num(r.s_total_running) << ',' << r.flags << "\n";
  }
}

namespace {

// Shared load/validate/run scaffold; returns nonzero exit code on failure.
int prepare_run(const std::string& source, const Overrides& o, std::ostream& err,
                Protocol& p, RunResult& result) {
  try {
    p = load_protocol(source, o);
  } catch (const ProtocolParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "validation error: " << e.what() << "\n";
    return 3;
  }
  try {
    validate_protocol(p);
  } catch (const Error& e) {
    err << "validation error: " << e.what() << "\n";
    return 3;
  }
  try {
    result = run(p);
  } catch (const Error& e) {
    err << "step error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace

int cmd_run(const std::string& source, const Overrides& o, std::ostream& out,
            std::ostream& err) {
  Protocol p;
  RunResult result;
  if (const int rc = prepare_run(source, o, err, p, result)) return rc;
  write_csv(out, result.ledger);
  return 0;
}

int cmd_audit(const std::string& source, const Overrides& o, std::ostream& out,
              std::ostream& err) {
  Protocol p;
  RunResult result;
  if (const int rc = prepare_run(source, o, err, p, result)) return rc;
  const AuditReport report = audit(result, p);

  out << "audit: protocol=" << p.name << " mode=" << mode_name(p.config.mode)
      << " cycles=" << p.config.cycles << "\n";
  out << "net work extracted: " << num(report.net_work) << "\n";
  out << "net heat into bath: " << num(result.bath.cumulative_heat) << "\n";
  out << "bath entropy gain: " << num(result.bath.cumulative_entropy) << "\n";
  out << "cycle closure: " << (report.closure.closed ? "closed" : "open")
      << " (state distance " << num(report.closure.state_distance) << ", volumes "
      << (report.closure.volumes_match ? "match" : "differ") << ")\n";
  if (report.findings.empty()) {
    out << "findings: none\n";
  } else {
    out << "findings:\n";
    for (const auto& f : report.findings)
      out << "  cycle " << f.cycle << " step " << f.step_id << ": " << f.kind
          << " (margin " << num(f.margin) << ")\n";
  }
  out << "Kelvin-Planck: "
      << (report.kelvin_planck_violation
              ? "VIOLATION (net work from a single bath over a closed cycle)"
              : "ok")
      << "\n";
  out << "verdict: " << verdict_of(report) << "\n";

  nlohmann::json machine;
  machine["protocol"] = p.name;
  machine["mode"] = mode_name(p.config.mode);
  machine["cycles"] = p.config.cycles;
  machine["net_work"] = report.net_work;
  machine["bath_entropy_gain"] = result.bath.cumulative_entropy;
  machine["closed"] = report.closure.closed;
  machine["state_distance"] = report.closure.state_distance;
  machine["kelvin_planck_violation"] = report.kelvin_planck_violation;
  machine["verdict"] = verdict_of(report);
  machine["findings"] = nlohmann::json::array();
  for (const auto& f : report.findings)
    machine["findings"].push_back(
        {{"cycle", f.cycle}, {"step", f.step_id}, {"kind", f.kind}, {"margin", f.margin}});
  out << "--- machine-readable ---\n" << machine.dump(2) << "\n";
  return exit_code_of(report);
}

int cmd_compare(const std::string& source, const Overrides& o, std::ostream& out,
                std::ostream& err) {
  Overrides collapse = o, no_collapse = o;
  collapse.mode = Mode::collapse;
  no_collapse.mode = Mode::no_collapse;

  Protocol pc, pn;
  RunResult rc_result, nc_result;
  if (const int rc = prepare_run(source, collapse, err, pc, rc_result)) return rc;
  if (const int rc = prepare_run(source, no_collapse, err, pn, nc_result)) return rc;

  const auto rows_c = rc_result.ledger.avg_rows();
  const auto rows_n = nc_result.ledger.avg_rows();
  if (rows_c.size() != rows_n.size()) {
    err << "compare: step counts differ between modes\n";
    return 4;
  }

  out << "# compare protocol=" << pc.name << " collapse vs no-collapse\n";
  out << "cycle,step_id,step_kind,S_vN_joint_collapse,S_vN_joint_no_collapse,"
         "joint_diff,S_vN_system_diff,H_cond_diff,W_diff\n";
  double max_joint = 0.0;
  for (size_t i = 0; i < rows_c.size(); ++i) {
    const auto& a = *rows_c[i];
    const auto& b = *rows_n[i];
    const double dj = std::abs(a.s_vn_joint - b.s_vn_joint);
    max_joint = std::max(max_joint, dj);
    out << a.cycle << ',' << a.step_id << ',' << a.step_kind << ','
        << num(a.s_vn_joint) << ',' << num(b.s_vn_joint) << ',' << num(dj) << ','
        << num(std::abs(a.s_vn_system - b.s_vn_system)) << ','
        << num(std::abs(a.h_cond_classical - b.h_cond_classical)) << ','
        << num(std::abs(a.work - b.work)) << "\n";
  }
  out << "# max joint-entropy deviation: " << num(max_joint) << "\n";
  return max_joint <= tol::eig ? 0 : 1;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite-dimensional quantum thermodynamics cycle simulator"};
  app.require_subcommand(0, 1);

  bool list = false;
  app.add_flag("--list", list, "List builtin protocols and exit");

  Overrides o;
  std::string source;
  std::string out_path;
  std::string mode_str, reset_str;
  double temperature = 0.0, kb = 0.0;
  int cycles = 0;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("protocol", source, "builtin:<name> or protocol file path")
        ->required();
    cmd->add_option("--mode", mode_str, "Interpretation mode: collapse or no-collapse");
    cmd->add_option("--temperature", temperature, "Bath temperature (default 1.0)");
    cmd->add_option("--kb", kb, "Boltzmann constant (default 1.0)");
    cmd->add_option("--cycles", cycles, "Number of cycles (default 1)");
    cmd->add_option("--seed", seed, "Ledger header seed (default 42)");
    cmd->add_option("--reset", reset_str, "Reset step kind: landauer or unitary-attempt");
    cmd->add_flag("--permit-infeasible-reset", o.permit_infeasible_reset,
                  "Perform infeasible unitary resets anyway, tagged NONPHYSICAL");
    cmd->add_option("--w1sq", o.w1_squared, "Spin weight w1^2 for builtin:vn-cycle");
    cmd->add_option("--n", o.n_particles, "Particle count for builtin:vn-cycle");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "Run a protocol and print the ledger CSV");
  add_common(run_cmd);
  run_cmd->add_option("--out", out_path, "Write the CSV to a file instead of stdout");

  CLI::App* audit_cmd =
      app.add_subcommand("audit", "Run a protocol and print the second-law audit");
  add_common(audit_cmd);

  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "Run a protocol in both interpretation modes and diff the ledgers");
  add_common(compare_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (list) {
    for (const auto& name : builtin_names()) out << name << "\n";
    return 0;
  }
  if (app.get_subcommands().empty()) {
    err << app.help();
    return 1;
  }

  const CLI::App* cmd = app.get_subcommands().front();
  if (cmd->count("--mode")) {
    try {
      o.mode = mode_from_name(mode_str);
    } catch (const Error& e) {
      err << "validation error: " << e.what() << "\n";
      return 3;
    }
  }
  if (cmd->count("--temperature")) o.temperature = temperature;
  if (cmd->count("--kb")) o.k_b = kb;
  if (cmd->count("--cycles")) o.cycles = cycles;
  if (cmd->count("--seed")) o.seed = seed;
  if (cmd->count("--reset")) {
    if (reset_str == "landauer") {
      o.reset = ResetKind::landauer;
    } else if (reset_str == "unitary-attempt") {
      o.reset = ResetKind::unitary_attempt;
    } else {
      err << "validation error: unknown reset kind: " << reset_str << "\n";
      return 3;
    }
  }

  if (cmd == run_cmd) {
    if (!out_path.empty()) {
      std::ofstream file(out_path);
      if (!file) {
        err << "cannot open output file: " << out_path << "\n";
        return 1;
      }
      return cmd_run(source, o, file, err);
    }
    return cmd_run(source, o, out, err);
  }
  if (cmd == audit_cmd) return cmd_audit(source, o, out, err);
  return cmd_compare(source, o, out, err);
}

}  // namespace qtherm::cli
