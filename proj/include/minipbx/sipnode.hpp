#ifndef MINIPBX_SIPNODE_HPP
#define MINIPBX_SIPNODE_HPP

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "minipbx/confkit.hpp"
#include "minipbx/net.hpp"
#include "minipbx/sentinel.hpp"
#include "minipbx/sip.hpp"
#include "minipbx/vtime.hpp"

namespace minipbx::sipnode {

inline constexpr std::uint16_t kDefaultSipPort = 5060;
inline constexpr VTime kRegistrationTtl = 3600 * kMillisPerSecond;

struct Registration {
    std::string peer;
    Ipv4 addr;
    std::uint16_t port = 0;
    VTime expires_at = 0;
    bool authenticated = true;  // only authenticated registrations are stored
};

// Outcome of one REGISTER exchange, for metrics and event wiring.
enum class RegisterOutcome { Ok, Challenged, BadDigest, UnknownPeer };

struct RegisterResult {
    sip::SipMessage response;
    RegisterOutcome outcome;
};

using EventFn = std::function<void(const sentinel::SecurityEvent&)>;

// Peer directory + registration table. Challenges REGISTERs with a fresh
// nonce and verifies the single-round digest against the peer's secret.
class Registrar {
public:
    Registrar(std::vector<confkit::PeerEntry> peers, EventFn emit = {});

    RegisterResult handle_register(const sip::SipMessage& req, Ipv4 src,
                                   std::uint16_t sport, VTime now);

    // Expired registrations are purged lazily on lookup.
    const Registration* find_registration(const std::string& peer, VTime now);
    const confkit::PeerEntry* find_peer(const std::string& name) const;
    const std::vector<confkit::PeerEntry>& peers() const { return peers_; }

    std::vector<Registration> registrations(VTime now);

    // Deterministic, never repeats within a run.
    std::string fresh_nonce();
    const std::vector<std::string>& issued_nonces() const { return issued_; }

private:
    void emit(sentinel::SecurityEvent ev);

    std::vector<confkit::PeerEntry> peers_;
    EventFn emit_;
    std::map<std::string, Registration> registrations_;
    std::map<std::string, std::string> outstanding_nonce_;  // peer -> challenge
    std::uint64_t nonce_counter_ = 0;
    std::vector<std::string> issued_;
};

enum class CallState { Inviting, Ringing, Active, Terminated, NoAnswer };
enum class CallEvent { Invite, Ring, Answer, Bye, Timeout };

const char* call_state_name(CallState s);
const char* call_event_name(CallEvent e);

struct TransitionError {
    CallState state;
    CallEvent event;
    std::string message() const;
};

// Exhaustive transition table; every (state, event) pair either moves or
// reports an error -- nothing is silently dropped.
std::optional<CallState> next_state(CallState s, CallEvent e);

struct CallSession {
    std::string id;  // Call-ID token
    std::string caller;
    std::string callee;
    CallState state = CallState::Inviting;
};

// Applies `e`; returns the error for illegal transitions.
std::optional<TransitionError> session_event(CallSession& s, CallEvent e);

}  // namespace minipbx::sipnode

#endif
