#include "grf/schema.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace grf {

namespace detail {
extern const char* const kScenarioSchema;
}

namespace {

std::string format_issues(const std::vector<ConfigIssue>& issues) {
  std::ostringstream os;
  os << "invalid scenario:";
  for (const ConfigIssue& i : issues) {
    os << "\n  " << (i.pointer.empty() ? "/" : i.pointer);
    if (i.line > 0) os << " (line " << i.line << ")";
    os << ": " << i.message;
  }
  return os.str();
}

std::string escape_pointer_token(const std::string& key) {
  std::string out;
  for (char ch : key) {
    if (ch == '~')
      out += "~0";
    else if (ch == '/')
      out += "~1";
    else
      out += ch;
  }
  return out;
}

std::string type_name(const Json& v) {
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  if (v.is_number()) return "number";
  return "null";
}

bool has_type(const Json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "number") return v.is_number();
  if (t == "integer") {
    if (v.is_number_integer() || v.is_number_unsigned()) return true;
    if (!v.is_number_float()) return false;
    const double d = v.get<double>();
    return std::isfinite(d) && d == std::floor(d);
  }
  if (t == "null") return v.is_null();
  return false;
}

std::string with_description(const Json& schema, std::string msg) {
  if (schema.contains("description")) msg += " (" + schema["description"].get<std::string>() + ")";
  return msg;
}

std::string number_text(const Json& v) {
  std::ostringstream os;
  os << v.dump();
  return os.str();
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : ParameterError(format_issues(issues)), issues_(std::move(issues)) {}

std::map<std::string, int> json_pointer_lines(const std::string& text) {
  struct Frame {
    bool object;
    std::string pointer;
    int index = 0;
    std::string key;
    bool expect_key = true;
  };
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;
  std::size_t i = 0;
  auto value_pointer = [&]() -> std::string {
    if (stack.empty()) return "";
    const Frame& f = stack.back();
    return f.pointer + "/" + (f.object ? escape_pointer_token(f.key) : std::to_string(f.index));
  };
  auto record = [&] { lines.emplace(value_pointer(), line); };
  while (i < text.size()) {
    const char ch = text[i];
    if (ch == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
    } else if (ch == '{' || ch == '[') {
      record();
      stack.push_back(Frame{ch == '{', value_pointer(), 0, {}, true});
      ++i;
    } else if (ch == '}' || ch == ']') {
      if (!stack.empty()) stack.pop_back();
      ++i;
    } else if (ch == ',') {
      if (!stack.empty()) {
        if (stack.back().object)
          stack.back().expect_key = true;
        else
          ++stack.back().index;
      }
      ++i;
    } else if (ch == ':') {
      if (!stack.empty()) stack.back().expect_key = false;
      ++i;
    } else if (ch == '"') {
      const int start_line = line;
      std::string raw;
      ++i;
      while (i < text.size() && text[i] != '"') {
        if (text[i] == '\\' && i + 1 < text.size()) raw += text[i++];
        raw += text[i++];
      }
      ++i;
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        // keys in the scenario are plain; decode the common escapes anyway
        std::string key;
        for (std::size_t q = 0; q < raw.size(); ++q) key += (raw[q] == '\\' && q + 1 < raw.size()) ? raw[++q] : raw[q];
        stack.back().key = key;
      } else {
        lines.emplace(value_pointer(), start_line);
      }
    } else {
      record();
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) && text[i] != ',' &&
             text[i] != '}' && text[i] != ']')
        ++i;
    }
  }
  return lines;
}

Json parse_json_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t q = 0; q + 1 < e.byte && q < text.size(); ++q) {
      if (text[q] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    ConfigIssue issue;
    issue.message = "JSON syntax error at column " + std::to_string(col) + ": " + e.what();
    issue.line = static_cast<int>(line);
    throw ConfigError({issue});
  }
}

SchemaValidator::SchemaValidator(Json schema) : schema_(std::move(schema)) {}

Json SchemaValidator::validate(const Json& doc, const std::string& text) const {
  Json out = doc;
  std::vector<ConfigIssue> issues;
  check(schema_, out, "", issues);
  if (!issues.empty()) {
    const auto lines = text.empty() ? std::map<std::string, int>{} : json_pointer_lines(text);
    for (ConfigIssue& is : issues) {
      // a missing key is reported at its parent
      std::string p = is.pointer;
      while (true) {
        const auto it = lines.find(p);
        if (it != lines.end()) {
          is.line = it->second;
          break;
        }
        if (p.empty()) break;
        p = p.substr(0, p.rfind('/'));
      }
    }
    throw ConfigError(std::move(issues));
  }
  return out;
}

void SchemaValidator::check(const Json& schema, Json& value, const std::string& pointer,
                            std::vector<ConfigIssue>& out) const {
  if (schema.contains("type")) {
    const Json& t = schema["type"];
    bool ok = false;
    std::string expected;
    if (t.is_array()) {
      for (const auto& x : t) {
        ok = ok || has_type(value, x.get<std::string>());
        expected += (expected.empty() ? "" : " or ") + x.get<std::string>();
      }
    } else {
      ok = has_type(value, t.get<std::string>());
      expected = t.get<std::string>();
    }
    if (!ok) {
      out.push_back({pointer, with_description(schema, "expected " + expected + ", got " + type_name(value))});
      return;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == value;
    if (!found) out.push_back({pointer, value.dump() + " is not one of " + schema["enum"].dump()});
  }
  if (value.is_number()) {
    const double v = value.get<double>();
    if (!std::isfinite(v)) out.push_back({pointer, "must be finite"});
    if (schema.contains("minimum") && !(v >= schema["minimum"].get<double>()))
      out.push_back({pointer, with_description(schema, number_text(value) + " must be >= " + schema["minimum"].dump())});
    if (schema.contains("maximum") && !(v <= schema["maximum"].get<double>()))
      out.push_back({pointer, with_description(schema, number_text(value) + " must be <= " + schema["maximum"].dump())});
    if (schema.contains("exclusiveMinimum") && !(v > schema["exclusiveMinimum"].get<double>()))
      out.push_back(
          {pointer, with_description(schema, number_text(value) + " must be > " + schema["exclusiveMinimum"].dump())});
    if (schema.contains("exclusiveMaximum") && !(v < schema["exclusiveMaximum"].get<double>()))
      out.push_back(
          {pointer, with_description(schema, number_text(value) + " must be < " + schema["exclusiveMaximum"].dump())});
  }
  if (value.is_object()) {
    const Json props = schema.value("properties", Json::object());
    std::vector<std::string> required;
    if (schema.contains("required"))
      for (const auto& r : schema["required"]) required.push_back(r.get<std::string>());
    for (const std::string& r : required)
      if (!value.contains(r)) out.push_back({pointer + "/" + escape_pointer_token(r), "required key is missing"});
    if (schema.contains("additionalProperties") && schema["additionalProperties"] == false)
      for (const auto& [key, v] : value.items())
        if (!props.contains(key))
          out.push_back({pointer + "/" + escape_pointer_token(key), "unknown key"});
    for (const auto& [key, sub] : props.items()) {
      const std::string child = pointer + "/" + escape_pointer_token(key);
      if (!value.contains(key)) {
        if (sub.contains("default"))
          value[key] = sub["default"];
        else if (sub.value("type", Json()) == "object")
          value[key] = Json::object();
        else
          continue;
      }
      check(sub, value[key], child, out);
    }
  }
  if (value.is_array()) {
    if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>())
      out.push_back({pointer, "needs at least " + schema["minItems"].dump() + " items"});
    if (schema.contains("maxItems") && value.size() > schema["maxItems"].get<std::size_t>())
      out.push_back({pointer, "takes at most " + schema["maxItems"].dump() + " items"});
    if (schema.contains("items"))
      for (std::size_t q = 0; q < value.size(); ++q)
        check(schema["items"], value[q], pointer + "/" + std::to_string(q), out);
  }
}

const std::string& scenario_schema_text() {
  static const std::string text(detail::kScenarioSchema);
  return text;
}

const SchemaValidator& scenario_validator() {
  static const SchemaValidator v(Json::parse(scenario_schema_text()));
  return v;
}

}  // namespace grf
