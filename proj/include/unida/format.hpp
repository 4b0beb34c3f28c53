#pragma once

#include <string>

namespace unida {

// Shortest decimal text that parses back to the same double.
std::string fmt_double(double v);

// Strict parse of a whole field; returns false on trailing garbage.
bool parse_double(const std::string& text, double& out);
bool parse_int(const std::string& text, long long& out);

}  // namespace unida
