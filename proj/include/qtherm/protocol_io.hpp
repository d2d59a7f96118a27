#ifndef QTHERM_PROTOCOL_IO_HPP
#define QTHERM_PROTOCOL_IO_HPP

#include <string>

#include "qtherm/engine.hpp"

namespace qtherm {

// Malformed document or schema violation (unknown key, wrong type, unknown
// enum value); messages carry the offending location.
struct ProtocolParseError : Error {
  using Error::Error;
};

// JSON protocol documents with sections name/layout/config/steps.
// parse(serialize(p)) == p; unknown keys are rejected.
Protocol parse_protocol(const std::string& text);
std::string serialize_protocol(const Protocol& p);

Protocol load_protocol_file(const std::string& path);
void save_protocol_file(const Protocol& p, const std::string& path);

}  // namespace qtherm

#endif
