#include <doctest.h>

#include <random>

#include "minipbx/digest.hpp"
#include "minipbx/tunnel.hpp"

using namespace minipbx;
using namespace minipbx::tunnel;

TEST_SUITE_BEGIN("tunnel");

namespace {

std::vector<std::uint8_t> keystream(Rc4& rc4, std::size_t n) {
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = rc4.next();
    return out;
}

std::string hex(const std::vector<std::uint8_t>& v) {
    return to_hex(v.data(), v.size());
}

confkit::TunnelConfig pool_10_to_20() {
    return {Ipv4(192, 168, 100, 37), Ipv4(192, 168, 100, 10), Ipv4(192, 168, 100, 20)};
}

confkit::CredentialTable demo_creds() {
    confkit::CredentialTable creds;
    creds.entries = {{"vpnuser1", "4321"}, {"vpnuser2", "8642"}, {"suresh", "2468"}};
    return creds;
}

}  // namespace

// Keystream vectors frozen from an independent reference run before the
// build (RFC 6229 for the 128-bit key, plus the classic ASCII keys).
TEST_CASE("rc4 reference keystream vectors") {
    std::uint8_t key128[16];
    for (int i = 0; i < 16; ++i) key128[i] = std::uint8_t(i + 1);
    Rc4 rc4(key128, sizeof(key128));
    CHECK(hex(keystream(rc4, 16)) == "9ac7cc9a609d1ef7b2932899cde41b97");
    CHECK(hex(keystream(rc4, 16)) == "5248c4959014126a6e8a84f11d1a9e1c");

    Rc4 a(reinterpret_cast<const std::uint8_t*>("Key"), 3);
    CHECK(hex(keystream(a, 6)) == "eb9f7781b734");
    Rc4 b(reinterpret_cast<const std::uint8_t*>("Wiki"), 4);
    CHECK(hex(keystream(b, 6)) == "6044db6d41b7");
    Rc4 c(reinterpret_cast<const std::uint8_t*>("Secret"), 6);
    CHECK(hex(keystream(c, 6)) == "04d46b053ca8");
}

TEST_CASE("rc4 state stays a permutation through keying and output") {
    std::uint8_t key[16] = {9, 8, 7, 6, 5, 4, 3, 2, 1, 0, 1, 2, 3, 4, 5, 6};
    Rc4 rc4(key, sizeof(key));
    CHECK(rc4.permutation_ok());
    for (int i = 0; i < 4096; ++i) rc4.next();
    CHECK(rc4.permutation_ok());
}

TEST_CASE("rc4 apply twice with identically keyed states is the identity") {
    std::uint8_t key[16] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
    std::vector<std::uint8_t> payload = {'h', 'e', 'l', 'l', 'o', 0, 255, 7};
    Rc4 enc(key, sizeof(key));
    Rc4 dec(key, sizeof(key));
    CHECK(dec.apply(enc.apply(payload)) == payload);
}

TEST_CASE("rc4 empty payload leaves the state untouched") {
    std::uint8_t key[4] = {1, 2, 3, 4};
    Rc4 a(key, sizeof(key));
    Rc4 b(key, sizeof(key));
    CHECK(a.apply(nullptr, 0).empty());
    // both produce the same next byte: a did not advance
    CHECK(a.next() == b.next());
}

TEST_CASE("key derivation is deterministic and matches the frozen digest") {
    auto k1 = derive_key("vpnuser1", "4321");
    auto k2 = derive_key("vpnuser1", "4321");
    CHECK(k1 == k2);
    CHECK(to_hex(k1.data(), k1.size()) == "db58b45e36450bafb34b1f9450d5ae7c");
    Rc4 rc4(k1.data(), k1.size());
    CHECK(hex(keystream(rc4, 16)) == "901a8e4fb549038948f1d5b2a5e636a3");
}

TEST_CASE("establish leases the lowest free pool address") {
    TunnelServer server(pool_10_to_20(), demo_creds());
    auto r1 = server.establish("vpnuser1", "4321", 0);
    REQUIRE(std::holds_alternative<TunnelSession*>(r1));
    CHECK(std::get<TunnelSession*>(r1)->leased.str() == "192.168.100.10");

    auto r2 = server.establish("vpnuser2", "8642", 1);
    REQUIRE(std::holds_alternative<TunnelSession*>(r2));
    CHECK(std::get<TunnelSession*>(r2)->leased.str() == "192.168.100.11");
}

TEST_CASE("bad credentials are refused") {
    TunnelServer server(pool_10_to_20(), demo_creds());
    auto r = server.establish("vpnuser1", "0000", 0);
    REQUIRE(std::holds_alternative<EstablishError>(r));
    CHECK(std::get<EstablishError>(r) == EstablishError::BadCredentials);
    auto r2 = server.establish("nosuch", "4321", 0);
    REQUIRE(std::holds_alternative<EstablishError>(r2));
}

TEST_CASE("pool exhaustion reports a capacity error; release frees the lease") {
    confkit::TunnelConfig tiny{Ipv4(10, 0, 0, 1), Ipv4(10, 0, 0, 5), Ipv4(10, 0, 0, 6)};
    confkit::CredentialTable creds;
    creds.entries = {{"a", "1"}, {"b", "2"}, {"c", "3"}};
    TunnelServer server(tiny, creds);
    REQUIRE(std::holds_alternative<TunnelSession*>(server.establish("a", "1", 0)));
    REQUIRE(std::holds_alternative<TunnelSession*>(server.establish("b", "2", 0)));
    auto full = server.establish("c", "3", 0);
    REQUIRE(std::holds_alternative<EstablishError>(full));
    CHECK(std::get<EstablishError>(full) == EstablishError::PoolExhausted);

    CHECK(server.release("a"));
    auto again = server.establish("c", "3", 1);
    REQUIRE(std::holds_alternative<TunnelSession*>(again));
    CHECK(std::get<TunnelSession*>(again)->leased.str() == "10.0.0.5");
}

TEST_CASE("live sessions never share a lease") {
    TunnelServer server(pool_10_to_20(), demo_creds());
    server.establish("vpnuser1", "4321", 0);
    server.establish("vpnuser2", "8642", 0);
    server.establish("suresh", "2468", 0);
    auto sessions = server.sessions();
    REQUIRE(sessions.size() == 3);
    CHECK(sessions[0]->leased != sessions[1]->leased);
    CHECK(sessions[1]->leased != sessions[2]->leased);
}

TEST_CASE("seal/open round-trips 100 sequential packets in lockstep") {
    auto key = derive_key("vpnuser1", "4321");
    Rc4 sealer(key.data(), key.size());
    Rc4 opener(key.data(), key.size());
    std::mt19937 rng(7);
    for (int i = 0; i < 100; ++i) {
        std::vector<std::uint8_t> payload(rng() % 200);
        for (auto& b : payload) b = std::uint8_t(rng());
        auto frame = seal_frame(sealer, payload);
        auto opened = open_frame(opener, frame);
        REQUIRE(std::holds_alternative<std::vector<std::uint8_t>>(opened));
        CHECK(std::get<std::vector<std::uint8_t>>(opened) == payload);
    }
}

TEST_CASE("sealed wire bytes hide the plaintext") {
    auto key = derive_key("vpnuser1", "4321");
    Rc4 sealer(key.data(), key.size());
    std::string text = "REGISTER sip:harish@192.168.100.37 SIP/2.0\r\n\r\n";
    std::vector<std::uint8_t> payload(text.begin(), text.end());
    auto frame = seal_frame(sealer, payload);
    std::string wire(frame.begin(), frame.end());
    CHECK(wire.find("REGISTER") == std::string::npos);
    CHECK(frame != payload);
}

TEST_CASE("a dropped sealed frame desyncs the stream and the checksum flags it") {
    auto key = derive_key("vpnuser1", "4321");
    Rc4 sealer(key.data(), key.size());
    Rc4 opener(key.data(), key.size());
    std::vector<std::uint8_t> p1 = {1, 2, 3, 4};
    std::vector<std::uint8_t> p2 = {5, 6, 7, 8};
    seal_frame(sealer, p1);  // lost on the wire
    auto frame2 = seal_frame(sealer, p2);
    auto opened = open_frame(opener, frame2);
    REQUIRE(std::holds_alternative<OpenError>(opened));
    CHECK(std::get<OpenError>(opened) == OpenError::ChecksumMismatch);
}

TEST_CASE("short and length-mismatched frames are rejected") {
    Rc4 opener(reinterpret_cast<const std::uint8_t*>("k"), 1);
    auto short_frame = open_frame(opener, {1, 2, 3});
    REQUIRE(std::holds_alternative<OpenError>(short_frame));
    CHECK(std::get<OpenError>(short_frame) == OpenError::ShortFrame);

    std::vector<std::uint8_t> bad = {0, 0, 0, 9, 0, 0, 0, 0, 1, 2};  // says 9, carries 2
    auto mismatch = open_frame(opener, bad);
    REQUIRE(std::holds_alternative<OpenError>(mismatch));
    CHECK(std::get<OpenError>(mismatch) == OpenError::LengthMismatch);
}

TEST_CASE("session table dump is lease-ordered tab-separated text") {
    TunnelServer server(pool_10_to_20(), demo_creds());
    server.establish("vpnuser2", "8642", 1500);
    server.establish("vpnuser1", "4321", 2000);
    CHECK(server.table_dump() ==
          "vpnuser2\t192.168.100.10\t1970-01-01T00:00:01.500Z\n"
          "vpnuser1\t192.168.100.11\t1970-01-01T00:00:02.000Z\n");
}

TEST_SUITE_END();
