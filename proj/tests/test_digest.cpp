#include <doctest.h>

#include "minipbx/digest.hpp"

using namespace minipbx;

TEST_SUITE_BEGIN("digest");

// RFC 1321 appendix values.
TEST_CASE("md5 reference vectors") {
    CHECK(md5_hex("") == "d41d8cd98f00b204e9800998ecf8427e");
    CHECK(md5_hex("a") == "0cc175b9c0f1b6a831c399e269772661");
    CHECK(md5_hex("abc") == "900150983cd24fb0d6963f7d28e17f72");
    CHECK(md5_hex("message digest") == "f96b697d7cb7938d525a2f31aaf161d0");
}

TEST_CASE("md5 raw output is 16 bytes matching hex form") {
    auto raw = md5_raw("abc");
    CHECK(to_hex(raw.data(), raw.size()) == md5_hex("abc"));
}

TEST_SUITE_END();
