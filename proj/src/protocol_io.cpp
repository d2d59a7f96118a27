#include "qtherm/protocol_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace qtherm {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ProtocolParseError(where + ": " + what);
}

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& required,
                  const std::set<std::string>& optional) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : obj.items())
    if (!required.count(key) && !optional.count(key))
      fail(where, "unknown key '" + key + "'");
  for (const auto& key : required)
    if (!obj.contains(key)) fail(where, "missing key '" + key + "'");
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where, "key '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  return get_as<T>(obj, key, where);
}

FactorPrep parse_prep(const json& value, const std::string& where) {
  FactorPrep prep;
  if (value.is_string()) {
    prep.kind = FactorPrep::Kind::pointer;
    prep.pointer_name = value.get<std::string>();
    return prep;
  }
  require_keys(value, where, {}, {"uniform", "amplitudes"});
  if (value.contains("uniform") && value.contains("amplitudes"))
    fail(where, "choose either 'uniform' or 'amplitudes'");
  if (value.contains("uniform")) {
    if (!value.at("uniform").is_boolean() || !value.at("uniform").get<bool>())
      fail(where, "'uniform' must be true when present");
    prep.kind = FactorPrep::Kind::uniform;
    return prep;
  }
  if (value.contains("amplitudes")) {
    prep.kind = FactorPrep::Kind::amplitudes;
    prep.amplitudes = get_as<std::vector<double>>(value, "amplitudes", where);
    return prep;
  }
  fail(where, "empty preparation object");
}

json serialize_prep(const FactorPrep& prep) {
  switch (prep.kind) {
    case FactorPrep::Kind::pointer:
      return prep.pointer_name;
    case FactorPrep::Kind::uniform:
      return json{{"uniform", true}};
    case FactorPrep::Kind::amplitudes:
      return json{{"amplitudes", prep.amplitudes}};
  }
  throw Error("unknown preparation kind");
}

ProtocolStep parse_step(const json& obj, const std::string& where) {
  if (!obj.is_object() || !obj.contains("kind"))
    fail(where, "step needs a 'kind' key");
  ProtocolStep step;
  const std::string kind_name = get_as<std::string>(obj, "kind", where);
  try {
    step.kind = step_kind_from_name(kind_name);
  } catch (const Error&) {
    fail(where, "unknown step kind '" + kind_name + "'");
  }

  switch (step.kind) {
    case StepKind::Prepare: {
      require_keys(obj, where, {"kind", "state"}, {"volume_l", "volume_r"});
      const auto& state = obj.at("state");
      if (!state.is_object()) fail(where, "'state' must map subsystems to preparations");
      for (const auto& [label, value] : state.items())
        step.preparation[label] = parse_prep(value, where + ".state." + label);
      step.initial_volume_l = get_or<double>(obj, "volume_l", where, 1.0);
      step.initial_volume_r = get_or<double>(obj, "volume_r", where, 0.0);
      break;
    }
    case StepKind::ApplyUnitary:
      require_keys(obj, where, {"kind", "name", "args"}, {"param"});
      step.name = get_as<std::string>(obj, "name", where);
      step.args = get_as<std::vector<std::string>>(obj, "args", where);
      step.param = get_or<double>(obj, "param", where, 0.0);
      break;
    case StepKind::NonSelectiveMeasure:
      require_keys(obj, where, {"kind", "target"}, {"basis"});
      step.target = get_as<std::string>(obj, "target", where);
      step.basis = get_or<std::string>(obj, "basis", where, "pointer");
      break;
    case StepKind::SelectiveMeasure:
      require_keys(obj, where, {"kind", "target"}, {"basis", "apparatus"});
      step.target = get_as<std::string>(obj, "target", where);
      step.basis = get_or<std::string>(obj, "basis", where, "pointer");
      step.apparatus = get_or<std::string>(obj, "apparatus", where, "");
      break;
    case StepKind::CoupleApparatus:
      require_keys(obj, where, {"kind", "target", "apparatus"}, {});
      step.target = get_as<std::string>(obj, "target", where);
      step.apparatus = get_as<std::string>(obj, "apparatus", where);
      break;
    case StepKind::Separate:
      require_keys(obj, where, {"kind", "args"}, {"open_twin"});
      step.args = get_as<std::vector<std::string>>(obj, "args", where);
      step.open_twin = get_or<bool>(obj, "open_twin", where, false);
      break;
    case StepKind::IsothermalVolume:
      require_keys(obj, where, {"kind", "chamber", "v_from", "v_to"}, {"weight"});
      step.chamber = get_as<std::string>(obj, "chamber", where);
      step.v_from = get_as<double>(obj, "v_from", where);
      step.v_to = get_as<double>(obj, "v_to", where);
      step.weight = get_or<double>(obj, "weight", where, 1.0);
      break;
    case StepKind::CompressVacuum:
    case StepKind::ExtractWorkKnownPosition:
      require_keys(obj, where, {"kind"}, {"apparatus"});
      step.apparatus = get_or<std::string>(obj, "apparatus", where, "");
      break;
    case StepKind::LandauerReset:
    case StepKind::UnitaryResetAttempt:
      require_keys(obj, where, {"kind", "apparatus"}, {});
      step.apparatus = get_as<std::string>(obj, "apparatus", where);
      break;
    case StepKind::RemovePartition:
    case StepKind::InsertPartition:
      require_keys(obj, where, {"kind"}, {"weight"});
      step.weight = get_or<double>(obj, "weight", where, 1.0);
      break;
  }
  return step;
}

json serialize_step(const ProtocolStep& step) {
  json obj;
  obj["kind"] = step_kind_name(step.kind);
  switch (step.kind) {
    case StepKind::Prepare: {
      json state = json::object();
      for (const auto& [label, prep] : step.preparation)
        state[label] = serialize_prep(prep);
      obj["state"] = state;
      obj["volume_l"] = step.initial_volume_l;
      obj["volume_r"] = step.initial_volume_r;
      break;
    }
    case StepKind::ApplyUnitary:
      obj["name"] = step.name;
      obj["args"] = step.args;
      obj["param"] = step.param;
      break;
    case StepKind::NonSelectiveMeasure:
      obj["target"] = step.target;
      obj["basis"] = step.basis;
      break;
    case StepKind::SelectiveMeasure:
      obj["target"] = step.target;
      obj["basis"] = step.basis;
      if (!step.apparatus.empty()) obj["apparatus"] = step.apparatus;
      break;
    case StepKind::CoupleApparatus:
      obj["target"] = step.target;
      obj["apparatus"] = step.apparatus;
      break;
    case StepKind::Separate:
      obj["args"] = step.args;
      obj["open_twin"] = step.open_twin;
      break;
    case StepKind::IsothermalVolume:
      obj["chamber"] = step.chamber;
      obj["v_from"] = step.v_from;
      obj["v_to"] = step.v_to;
      obj["weight"] = step.weight;
      break;
    case StepKind::CompressVacuum:
    case StepKind::ExtractWorkKnownPosition:
      if (!step.apparatus.empty()) obj["apparatus"] = step.apparatus;
      break;
    case StepKind::LandauerReset:
    case StepKind::UnitaryResetAttempt:
      obj["apparatus"] = step.apparatus;
      break;
    case StepKind::RemovePartition:
    case StepKind::InsertPartition:
      obj["weight"] = step.weight;
      break;
  }
  return obj;
}

}  // namespace

Protocol parse_protocol(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ProtocolParseError(std::string("protocol: ") + e.what());
  }
  require_keys(doc, "protocol", {"layout", "steps"}, {"name", "config"});

  Protocol p;
  p.name = get_or<std::string>(doc, "name", "protocol", "unnamed");

  const auto& layout = doc.at("layout");
  if (!layout.is_array()) fail("protocol.layout", "expected an array");
  std::vector<SubsystemSpec> specs;
  for (size_t i = 0; i < layout.size(); ++i) {
    const std::string where = "protocol.layout[" + std::to_string(i) + "]";
    const auto& entry = layout[i];
    require_keys(entry, where, {"label", "role", "dimension", "pointer_basis"}, {});
    SubsystemSpec spec;
    spec.label = get_as<std::string>(entry, "label", where);
    try {
      spec.role = role_from_name(get_as<std::string>(entry, "role", where));
    } catch (const Error& e) {
      fail(where, e.what());
    }
    spec.dimension = get_as<int>(entry, "dimension", where);
    spec.pointer_basis = get_as<std::vector<std::string>>(entry, "pointer_basis", where);
    specs.push_back(std::move(spec));
  }
  p.layout = SystemLayout(std::move(specs));  // may throw LayoutConflict (validation)

  if (doc.contains("config")) {
    const auto& cfg = doc.at("config");
    const std::string where = "protocol.config";
    require_keys(cfg, where, {},
                 {"temperature", "k_b", "mode", "permit_infeasible_reset", "cycles",
                  "seed", "particle_scale", "memory_labels"});
    p.config.temperature = get_or<double>(cfg, "temperature", where, 1.0);
    p.config.k_b = get_or<double>(cfg, "k_b", where, 1.0);
    if (cfg.contains("mode")) {
      try {
        p.config.mode = mode_from_name(get_as<std::string>(cfg, "mode", where));
      } catch (const Error& e) {
        fail(where, e.what());
      }
    }
    p.config.permit_infeasible_reset =
        get_or<bool>(cfg, "permit_infeasible_reset", where, false);
    p.config.cycles = get_or<int>(cfg, "cycles", where, 1);
    p.config.seed = get_or<std::uint64_t>(cfg, "seed", where, 42);
    p.config.particle_scale = get_or<double>(cfg, "particle_scale", where, 1.0);
    p.config.memory_labels =
        get_or<std::vector<std::string>>(cfg, "memory_labels", where, {});
  }

  const auto& steps = doc.at("steps");
  if (!steps.is_array()) fail("protocol.steps", "expected an array");
  for (size_t i = 0; i < steps.size(); ++i)
    p.steps.push_back(parse_step(steps[i], "protocol.steps[" + std::to_string(i) + "]"));
  return p;
}

std::string serialize_protocol(const Protocol& p) {
  json doc;
  doc["name"] = p.name;
  json layout = json::array();
  for (const auto& s : p.layout.subsystems())
    layout.push_back({{"label", s.label},
                      {"role", role_name(s.role)},
                      {"dimension", s.dimension},
                      {"pointer_basis", s.pointer_basis}});
  doc["layout"] = layout;
  doc["config"] = {{"temperature", p.config.temperature},
                   {"k_b", p.config.k_b},
                   {"mode", mode_name(p.config.mode)},
                   {"permit_infeasible_reset", p.config.permit_infeasible_reset},
                   {"cycles", p.config.cycles},
                   {"seed", p.config.seed},
                   {"particle_scale", p.config.particle_scale},
                   {"memory_labels", p.config.memory_labels}};
  json steps = json::array();
  for (const auto& s : p.steps) steps.push_back(serialize_step(s));
  doc["steps"] = steps;
  return doc.dump(2) + "\n";
}

Protocol load_protocol_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProtocolParseError("cannot open protocol file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_protocol(buf.str());
}

void save_protocol_file(const Protocol& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write protocol file: " + path);
  out << serialize_protocol(p);
}

}  // namespace qtherm
