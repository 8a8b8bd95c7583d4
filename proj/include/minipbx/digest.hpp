#ifndef MINIPBX_DIGEST_HPP
#define MINIPBX_DIGEST_HPP

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace minipbx {

std::array<std::uint8_t, 16> md5_raw(std::string_view data);

// Lowercase 32-char hex digest.
std::string md5_hex(std::string_view data);

std::string to_hex(const std::uint8_t* data, std::size_t len);

}  // namespace minipbx

#endif
