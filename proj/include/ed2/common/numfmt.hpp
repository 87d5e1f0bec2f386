#pragma once

#include <string>

namespace ed2 {

// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

}  // namespace ed2

#include <span>

namespace ed2 {

// JSON array of doubles in shortest round-trip form: "[1,0.5,-2e-07]".
std::string format_double_array(std::span<const double> xs);

}  // namespace ed2
