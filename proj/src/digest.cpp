#include "minipbx/digest.hpp"

#include <openssl/evp.h>

namespace minipbx {

std::array<std::uint8_t, 16> md5_raw(std::string_view data) {
    std::array<std::uint8_t, 16> out{};
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_md5(), nullptr);
    return out;
}

std::string to_hex(const std::uint8_t* data, std::size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(len * 2);
    for (std::size_t i = 0; i < len; ++i) {
        s.push_back(digits[data[i] >> 4]);
        s.push_back(digits[data[i] & 0xf]);
    }
    return s;
}

std::string md5_hex(std::string_view data) {
    auto raw = md5_raw(data);
    return to_hex(raw.data(), raw.size());
}

}  // namespace minipbx
