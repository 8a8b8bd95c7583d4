#ifndef MINIPBX_NET_HPP
#define MINIPBX_NET_HPP

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace minipbx {

// Dotted-quad IPv4 address kept as a host-order integer so ranges and
// pool arithmetic stay trivial.
struct Ipv4 {
    std::uint32_t value = 0;

    constexpr Ipv4() = default;
    constexpr explicit Ipv4(std::uint32_t v) : value(v) {}
    constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
        : value((std::uint32_t(a) << 24) | (std::uint32_t(b) << 16) |
                (std::uint32_t(c) << 8) | std::uint32_t(d)) {}

    auto operator<=>(const Ipv4&) const = default;

    std::string str() const;

    static std::optional<Ipv4> parse(const std::string& text);
};

// Well-known service ports used throughout the filter policy.
namespace ports {
inline constexpr std::uint16_t kSsh = 22;
inline constexpr std::uint16_t kSmtp = 25;
inline constexpr std::uint16_t kPop = 110;
inline constexpr std::uint16_t kSsmtp = 225;   // value the mail layer documents, not 465
inline constexpr std::uint16_t kPop3s = 995;
inline constexpr std::uint16_t kPptp = 1723;
inline constexpr std::uint16_t kMysql = 3306;
inline constexpr std::uint16_t kSip = 5060;
}  // namespace ports

}  // namespace minipbx

#endif
