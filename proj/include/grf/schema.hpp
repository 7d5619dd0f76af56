#pragma once

// A small validator for the JSON Schema subset the scenario schema uses:
// type, enum, properties, required, additionalProperties: false, items,
// minItems, maxItems, minimum, maximum, exclusiveMinimum, exclusiveMaximum and
// default. Missing keys with a default are filled in; missing optional objects
// are created so that their own defaults apply.

#include <map>
#include <string>
#include <vector>

#include "grf/errors.hpp"
#include "grf/json_io.hpp"

namespace grf {

struct ConfigIssue {
  std::string pointer;  // JSON pointer into the document, "" for the root
  std::string message;
  int line = 0;         // 1-based source line, 0 when unknown
};

/// Parse or validation failure of a scenario document; the CLI maps it to exit code 1.
class ConfigError : public ParameterError {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

/// Line of every value in a JSON text, keyed by JSON pointer.
std::map<std::string, int> json_pointer_lines(const std::string& text);

/// Parses text, reporting syntax errors with their line and column.
Json parse_json_text(const std::string& text);

class SchemaValidator {
 public:
  explicit SchemaValidator(Json schema);

  /// Returns doc with defaults applied, or throws ConfigError listing every
  /// violation. `text` is used only to attach source lines.
  Json validate(const Json& doc, const std::string& text = {}) const;

 private:
  void check(const Json& schema, Json& value, const std::string& pointer, std::vector<ConfigIssue>& out) const;
  Json schema_;
};

/// The scenario schema, embedded at build time.
const std::string& scenario_schema_text();
const SchemaValidator& scenario_validator();

}  // namespace grf
