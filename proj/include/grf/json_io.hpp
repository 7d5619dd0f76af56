#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

namespace grf {

using Json = nlohmann::json;

/// Serializes with every floating-point number printed to 17 significant
/// digits; non-finite numbers become null. Key order is the sorted order of
/// the document, so output bytes depend only on the content.
void write_json(std::ostream& os, const Json& doc, int indent = 2);
std::string to_json_string(const Json& doc, int indent = 2);

/// "%.17g" with a trailing ".0" when the result would read back as an integer.
std::string format_double(double v);

}  // namespace grf
