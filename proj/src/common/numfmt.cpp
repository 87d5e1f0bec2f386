#include "ed2/common/numfmt.hpp"

#include <array>
#include <charconv>

namespace ed2 {

std::string format_double(double x) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    (void)ec;
    return std::string(buf.data(), end);
}

}  // namespace ed2

namespace ed2 {

std::string format_double_array(std::span<const double> xs) {
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += format_double(xs[i]);
    }
    out += ']';
    return out;
}

}  // namespace ed2
