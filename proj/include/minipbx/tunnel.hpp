#ifndef MINIPBX_TUNNEL_HPP
#define MINIPBX_TUNNEL_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "minipbx/confkit.hpp"
#include "minipbx/net.hpp"
#include "minipbx/vtime.hpp"

namespace minipbx::tunnel {

// Textbook RC4 stream state (KSA + PRGA). Simulation-grade sealing only; it
// exists so wire captures show ciphertext, not to make security claims.
class Rc4 {
public:
    Rc4() = default;
    explicit Rc4(const std::uint8_t* key, std::size_t len) { rekey(key, len); }

    void rekey(const std::uint8_t* key, std::size_t len);

    std::uint8_t next();

    // XORs the keystream into data, advancing the state.
    std::vector<std::uint8_t> apply(const std::uint8_t* data, std::size_t len);
    std::vector<std::uint8_t> apply(const std::vector<std::uint8_t>& data) {
        return apply(data.data(), data.size());
    }

    // The S table must stay a permutation of 0..255 after every step.
    bool permutation_ok() const;

private:
    std::array<std::uint8_t, 256> s_{};
    std::uint8_t i_ = 0, j_ = 0;
    bool keyed_ = false;
};

// 128-bit session key from the chap credentials; both tunnel ends derive the
// same key so their cipher pairs agree.
std::array<std::uint8_t, 16> derive_key(const std::string& user, const std::string& password);

struct TunnelSession {
    std::string user;
    Ipv4 leased;
    VTime established_at = 0;
    Rc4 send_cipher;  // client -> server direction
    Rc4 recv_cipher;
    std::uint64_t sealed = 0;
    std::uint64_t opened = 0;
    bool live = true;
};

enum class EstablishError { BadCredentials, PoolExhausted };
enum class OpenError { ShortFrame, LengthMismatch, ChecksumMismatch, SessionClosed };

// Sealed frame: 4-octet big-endian plaintext length, 4-octet additive
// checksum of the plaintext, then the RC4 ciphertext. The checksum gives
// open() a desync signal when a sealed frame was lost.
std::vector<std::uint8_t> seal_frame(Rc4& cipher, const std::vector<std::uint8_t>& payload);
std::variant<std::vector<std::uint8_t>, OpenError> open_frame(
    Rc4& cipher, const std::vector<std::uint8_t>& frame);

class TunnelServer {
public:
    TunnelServer(confkit::TunnelConfig config, confkit::CredentialTable creds);

    std::variant<TunnelSession*, EstablishError> establish(const std::string& user,
                                                           const std::string& password,
                                                           VTime now);
    // Returns the lease to the pool.
    bool release(const std::string& user);

    std::vector<std::uint8_t> seal(TunnelSession& s, const std::vector<std::uint8_t>& payload);
    std::variant<std::vector<std::uint8_t>, OpenError> open(
        TunnelSession& s, const std::vector<std::uint8_t>& frame);

    TunnelSession* session_for(const std::string& user);
    const TunnelSession* session_at(Ipv4 leased) const;
    TunnelSession* session_at_mut(Ipv4 leased);
    std::vector<const TunnelSession*> sessions() const;  // lease order

    std::string table_dump() const;  // user, leased-addr, established-at

    const confkit::TunnelConfig& config() const { return config_; }

private:
    std::optional<Ipv4> lease_lowest_free();

    confkit::TunnelConfig config_;
    confkit::CredentialTable creds_;
    std::map<std::string, TunnelSession> by_user_;
    std::set<Ipv4> leased_;
};

}  // namespace minipbx::tunnel

#endif
