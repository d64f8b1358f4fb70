#pragma once

// Scenario files: `[section]` headers and `key = value` lines, `#` comments.
// Strict: unknown keys are errors. Units are part of the key names.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmetro/engine.hpp"
#include "gmetro/error.hpp"

namespace gmetro::scenario {

struct Diagnostic {
  ErrorCode code = ErrorCode::ParseError;
  std::size_t line = 0;  // 1-based, 0 when not tied to a line
  std::string key;
  std::string message;
};

std::string to_string(const Diagnostic& d);

struct ParseOutcome {
  std::optional<engine::Scenario> scenario;
  std::vector<Diagnostic> errors;
  bool ok() const { return errors.empty(); }
};

/// Collects every independent error in one pass.
ParseOutcome parse_scenario(std::string_view text);

/// Throws Error with the first diagnostic's code; the message lists all.
engine::Scenario parse_scenario_or_throw(std::string_view text);

/// Canonical text; parsing it yields an equal Scenario.
std::string render(const engine::Scenario& scenario);

}  // namespace gmetro::scenario
