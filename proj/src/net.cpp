#include "minipbx/net.hpp"

#include <cstdio>

namespace minipbx {

std::string Ipv4::str() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (value >> 24) & 0xff,
                  (value >> 16) & 0xff, (value >> 8) & 0xff, value & 0xff);
    return buf;
}

std::optional<Ipv4> Ipv4::parse(const std::string& text) {
    unsigned a, b, c, d;
    char trailing;
    int n = std::sscanf(text.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &trailing);
    if (n != 4 || a > 255 || b > 255 || c > 255 || d > 255) return std::nullopt;
    return Ipv4(std::uint8_t(a), std::uint8_t(b), std::uint8_t(c), std::uint8_t(d));
}

}  // namespace minipbx
