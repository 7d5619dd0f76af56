#include "grf/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace grf {

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

namespace {

void write_value(std::ostream& os, const Json& v, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        os << "{}";
        return;
      }
      os << '{' << nl;
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) os << ',' << nl;
        first = false;
        os << pad << Json(it.key()).dump() << (indent > 0 ? ": " : ":");
        write_value(os, it.value(), indent, depth + 1);
      }
      os << nl << close << '}';
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        os << "[]";
        return;
      }
      // Arrays of plain numbers stay on one line; they hold the field data.
      bool flat = true;
      for (const auto& e : v) flat = flat && e.is_primitive();
      if (flat) {
        os << '[';
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) os << (indent > 0 ? ", " : ",");
          write_value(os, v[i], indent, depth + 1);
        }
        os << ']';
        return;
      }
      os << '[' << nl;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',' << nl;
        os << pad;
        write_value(os, v[i], indent, depth + 1);
      }
      os << nl << close << ']';
      return;
    }
    case Json::value_t::number_float:
      os << format_double(v.get<double>());
      return;
    default:
      os << v.dump();
  }
}

}  // namespace

void write_json(std::ostream& os, const Json& doc, int indent) {
  write_value(os, doc, indent, 0);
  os << '\n';
}

std::string to_json_string(const Json& doc, int indent) {
  std::ostringstream os;
  write_json(os, doc, indent);
  return os.str();
}

}  // namespace grf
