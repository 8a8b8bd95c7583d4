#include "minipbx/sipnode.hpp"

#include <cstdio>

namespace minipbx::sipnode {

Registrar::Registrar(std::vector<confkit::PeerEntry> peers, EventFn emit)
    : peers_(std::move(peers)), emit_(std::move(emit)) {}

void Registrar::emit(sentinel::SecurityEvent ev) {
    if (emit_) emit_(ev);
}

const confkit::PeerEntry* Registrar::find_peer(const std::string& name) const {
    for (const auto& p : peers_)
        if (p.name == name) return &p;
    return nullptr;
}

std::string Registrar::fresh_nonce() {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "n%08llx", static_cast<unsigned long long>(++nonce_counter_));
    issued_.push_back(buf);
    return buf;
}

RegisterResult Registrar::handle_register(const sip::SipMessage& req, Ipv4 src,
                                          std::uint16_t sport, VTime now) {
    const std::string& user = req.uri.user;
    const confkit::PeerEntry* peer = find_peer(user);
    if (!peer) {
        emit({sentinel::EventKind::UnknownUser, src, now,
              "REGISTER for unknown peer " + user});
        return {sip::SipMessage::status(404), RegisterOutcome::UnknownPeer};
    }

    auto auth_header = req.header("Authorization");
    if (!auth_header) {
        std::string nonce = fresh_nonce();
        outstanding_nonce_[user] = nonce;
        auto resp = sip::SipMessage::status(401);
        resp.with_header("Nonce", nonce);
        return {std::move(resp), RegisterOutcome::Challenged};
    }

    auto auth = sip::parse_authorization(*auth_header);
    auto outstanding = outstanding_nonce_.find(user);
    bool ok = auth && outstanding != outstanding_nonce_.end() &&
              auth->nonce == outstanding->second &&
              auth->response == sip::compute_digest(user, peer->secret, auth->nonce);
    if (!ok) {
        emit({sentinel::EventKind::AuthFailure, src, now,
              "bad REGISTER digest for peer " + user});
        std::string nonce = fresh_nonce();
        outstanding_nonce_[user] = nonce;
        auto resp = sip::SipMessage::status(401);
        resp.with_header("Nonce", nonce);
        return {std::move(resp), RegisterOutcome::BadDigest};
    }

    outstanding_nonce_.erase(outstanding);
    registrations_[user] = Registration{user, src, sport, now + kRegistrationTtl, true};
    emit({sentinel::EventKind::RegisterAttempt, src, now, "peer " + user + " registered"});
    auto resp = sip::SipMessage::status(200);
    resp.with_header("Expires", std::to_string(kRegistrationTtl / kMillisPerSecond));
    return {std::move(resp), RegisterOutcome::Ok};
}

const Registration* Registrar::find_registration(const std::string& peer, VTime now) {
    auto it = registrations_.find(peer);
    if (it == registrations_.end()) return nullptr;
    if (it->second.expires_at <= now) {
        registrations_.erase(it);
        return nullptr;
    }
    return &it->second;
}

std::vector<Registration> Registrar::registrations(VTime now) {
    std::vector<Registration> out;
    for (auto it = registrations_.begin(); it != registrations_.end();) {
        if (it->second.expires_at <= now) {
            it = registrations_.erase(it);
        } else {
            out.push_back(it->second);
            ++it;
        }
    }
    return out;
}

const char* call_state_name(CallState s) {
    switch (s) {
        case CallState::Inviting: return "inviting";
        case CallState::Ringing: return "ringing";
        case CallState::Active: return "active";
        case CallState::Terminated: return "terminated";
        case CallState::NoAnswer: return "no-answer";
    }
    return "?";
}

const char* call_event_name(CallEvent e) {
    switch (e) {
        case CallEvent::Invite: return "invite";
        case CallEvent::Ring: return "ring";
        case CallEvent::Answer: return "answer";
        case CallEvent::Bye: return "bye";
        case CallEvent::Timeout: return "timeout";
    }
    return "?";
}

std::string TransitionError::message() const {
    return std::string("illegal call event '") + call_event_name(event) + "' in state '" +
           call_state_name(state) + "'";
}

std::optional<CallState> next_state(CallState s, CallEvent e) {
    switch (s) {
        case CallState::Inviting:
            if (e == CallEvent::Ring) return CallState::Ringing;
            if (e == CallEvent::Timeout) return CallState::NoAnswer;
            return std::nullopt;
        case CallState::Ringing:
            if (e == CallEvent::Answer) return CallState::Active;
            if (e == CallEvent::Timeout) return CallState::NoAnswer;
            return std::nullopt;
        case CallState::Active:
            if (e == CallEvent::Bye) return CallState::Terminated;
            return std::nullopt;
        case CallState::Terminated:
        case CallState::NoAnswer:
            return std::nullopt;  // absorbing
    }
    return std::nullopt;
}

std::optional<TransitionError> session_event(CallSession& s, CallEvent e) {
    auto next = next_state(s.state, e);
    if (!next) return TransitionError{s.state, e};
    s.state = *next;
    return std::nullopt;
}

}  // namespace minipbx::sipnode
