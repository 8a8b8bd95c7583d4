#include "minipbx/tunnel.hpp"

#include <algorithm>
#include <sstream>

#include "minipbx/digest.hpp"

namespace minipbx::tunnel {

void Rc4::rekey(const std::uint8_t* key, std::size_t len) {
    for (int k = 0; k < 256; ++k) s_[k] = std::uint8_t(k);
    std::uint8_t j = 0;
    for (int k = 0; k < 256; ++k) {
        j = std::uint8_t(j + s_[k] + key[k % len]);
        std::swap(s_[k], s_[j]);
    }
    i_ = j_ = 0;
    keyed_ = true;
}

std::uint8_t Rc4::next() {
    i_ = std::uint8_t(i_ + 1);
    j_ = std::uint8_t(j_ + s_[i_]);
    std::swap(s_[i_], s_[j_]);
    return s_[std::uint8_t(s_[i_] + s_[j_])];
}

std::vector<std::uint8_t> Rc4::apply(const std::uint8_t* data, std::size_t len) {
    std::vector<std::uint8_t> out(len);
    for (std::size_t k = 0; k < len; ++k) out[k] = data[k] ^ next();
    return out;
}

bool Rc4::permutation_ok() const {
    std::array<bool, 256> seen{};
    for (std::uint8_t b : s_) {
        if (seen[b]) return false;
        seen[b] = true;
    }
    return keyed_;
}

std::array<std::uint8_t, 16> derive_key(const std::string& user, const std::string& password) {
    return md5_raw(user + ":" + password);
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

std::uint32_t additive_checksum(const std::vector<std::uint8_t>& data) {
    std::uint32_t sum = 0;
    for (std::uint8_t b : data) sum += b;
    return sum;
}

}  // namespace

std::vector<std::uint8_t> seal_frame(Rc4& cipher, const std::vector<std::uint8_t>& payload) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + payload.size());
    put_u32(out, std::uint32_t(payload.size()));
    put_u32(out, additive_checksum(payload));
    auto ct = cipher.apply(payload);
    out.insert(out.end(), ct.begin(), ct.end());
    return out;
}

std::variant<std::vector<std::uint8_t>, OpenError> open_frame(
    Rc4& cipher, const std::vector<std::uint8_t>& frame) {
    if (frame.size() < 8) return OpenError::ShortFrame;
    std::uint32_t length = get_u32(frame.data());
    std::uint32_t checksum = get_u32(frame.data() + 4);
    if (frame.size() - 8 != length) return OpenError::LengthMismatch;
    auto pt = cipher.apply(frame.data() + 8, length);
    if (additive_checksum(pt) != checksum) return OpenError::ChecksumMismatch;
    return pt;
}

TunnelServer::TunnelServer(confkit::TunnelConfig config, confkit::CredentialTable creds)
    : config_(config), creds_(std::move(creds)) {}

std::optional<Ipv4> TunnelServer::lease_lowest_free() {
    for (std::uint32_t a = config_.pool_first.value; a <= config_.pool_last.value; ++a) {
        Ipv4 addr(a);
        if (!leased_.count(addr)) return addr;
    }
    return std::nullopt;
}

std::variant<TunnelSession*, EstablishError> TunnelServer::establish(
    const std::string& user, const std::string& password, VTime now) {
    const confkit::Credential* cred = creds_.find(user);
    if (!cred || cred->secret != password) return EstablishError::BadCredentials;
    if (by_user_.count(user)) release(user);  // re-establish replaces the old lease

    auto addr = lease_lowest_free();
    if (!addr) return EstablishError::PoolExhausted;

    TunnelSession s;
    s.user = user;
    s.leased = *addr;
    s.established_at = now;
    auto key = derive_key(user, password);
    s.send_cipher.rekey(key.data(), key.size());
    s.recv_cipher.rekey(key.data(), key.size());
    leased_.insert(*addr);
    auto [it, inserted] = by_user_.insert_or_assign(user, std::move(s));
    return &it->second;
}

bool TunnelServer::release(const std::string& user) {
    auto it = by_user_.find(user);
    if (it == by_user_.end()) return false;
    leased_.erase(it->second.leased);
    by_user_.erase(it);
    return true;
}

std::vector<std::uint8_t> TunnelServer::seal(TunnelSession& s,
                                             const std::vector<std::uint8_t>& payload) {
    ++s.sealed;
    return seal_frame(s.send_cipher, payload);
}

std::variant<std::vector<std::uint8_t>, OpenError> TunnelServer::open(
    TunnelSession& s, const std::vector<std::uint8_t>& frame) {
    if (!s.live) return OpenError::SessionClosed;
    ++s.opened;
    return open_frame(s.recv_cipher, frame);
}

TunnelSession* TunnelServer::session_for(const std::string& user) {
    auto it = by_user_.find(user);
    return it == by_user_.end() ? nullptr : &it->second;
}

const TunnelSession* TunnelServer::session_at(Ipv4 leased) const {
    for (const auto& [user, s] : by_user_)
        if (s.leased == leased) return &s;
    return nullptr;
}

TunnelSession* TunnelServer::session_at_mut(Ipv4 leased) {
    for (auto& [user, s] : by_user_)
        if (s.leased == leased) return &s;
    return nullptr;
}

std::vector<const TunnelSession*> TunnelServer::sessions() const {
    std::vector<const TunnelSession*> out;
    for (const auto& [user, s] : by_user_) out.push_back(&s);
    std::sort(out.begin(), out.end(), [](const TunnelSession* a, const TunnelSession* b) {
        return a->leased < b->leased;
    });
    return out;
}

std::string TunnelServer::table_dump() const {
    std::ostringstream out;
    for (const auto* s : sessions())
        out << s->user << '\t' << s->leased.str() << '\t' << iso8601(s->established_at) << '\n';
    return out.str();
}

}  // namespace minipbx::tunnel
