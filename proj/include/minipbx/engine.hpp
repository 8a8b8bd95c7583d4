#ifndef MINIPBX_ENGINE_HPP
#define MINIPBX_ENGINE_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "minipbx/acl.hpp"
#include "minipbx/confkit.hpp"
#include "minipbx/dialplan.hpp"
#include "minipbx/ivrvm.hpp"
#include "minipbx/media.hpp"
#include "minipbx/net.hpp"
#include "minipbx/notify.hpp"
#include "minipbx/pktfilter.hpp"
#include "minipbx/sentinel.hpp"
#include "minipbx/sip.hpp"
#include "minipbx/sipnode.hpp"
#include "minipbx/tunnel.hpp"
#include "minipbx/vtime.hpp"

namespace minipbx::engine {

struct RunMetrics {
    std::map<std::string, std::int64_t> counters;

    void inc(const std::string& name, std::int64_t n = 1) { counters[name] += n; }
    std::int64_t get(const std::string& name) const;
    std::string report() const;  // sorted "name\tvalue" lines
};

struct Configs {
    std::vector<confkit::PeerEntry> peers;
    confkit::DialplanDoc dialplan_doc;
    confkit::VoicemailDoc voicemail;
    confkit::TunnelConfig tunnel;
    confkit::CredentialTable credentials;
};

struct EngineOptions {
    std::uint16_t sip_port = sipnode::kDefaultSipPort;
    sentinel::RateRule rate;
    int retry_cap = ivrvm::kDefaultRetryCap;
    int alert_log_floor = sentinel::kActionableFloor;
    Ipv4 server_addr = Ipv4(192, 168, 100, 37);
    acl::Principal ivr_principal{"ivr", "local"};
    acl::ObjectScope attendance_scope{"minipbx", "attendance"};
    std::string attendance_query_template = "attendance";
    std::string guest_context = "";  // empty: first dialplan context
};

enum class Outcome { Delivered, Dropped, Refused, Error };

struct DispatchResult {
    Outcome outcome = Outcome::Dropped;
    pktfilter::Verdict verdict = pktfilter::Verdict::Drop;
    std::optional<std::string> response;  // encoded SIP, when one is returned
};

struct ActiveCallInfo {
    std::string id;
    std::string caller;
    std::string callee;
    sipnode::CallState state = sipnode::CallState::Inviting;
    std::uint16_t caller_rtp_port = 0;  // server port accepting the caller's stream
    std::uint16_t callee_rtp_port = 0;
};

// Composition root: tunnel -> filter -> sentinel -> sipnode/dialplan under
// one virtual clock. Single logical owner of all state; sim callers interact
// through dispatch() and the scenario verbs.
class Pbx {
public:
    Pbx(Configs configs, EngineOptions options, VirtualClock& clock);
    ~Pbx();

    Pbx(const Pbx&) = delete;
    Pbx& operator=(const Pbx&) = delete;

    // Table-1 service bracket: store, notifier and sip report started before
    // the first call and stop in reverse order.
    void start_services();
    void stop_services();

    DispatchResult dispatch(pktfilter::Packet p);

    // Scenario-driven endpoint behavior.
    bool answer_call(const std::string& callee_peer);
    void dtmf(Ipv4 client_addr, char digit);

    // Admin operations.
    std::vector<std::string> apply_grant_statement(const std::string& text);
    void unblock(Ipv4 src);
    void seed_student(const std::string& id, const std::string& password, int attendance);
    void load_store(const acl::AttendanceStore& records);

    // VPN establishment with the auth-failure event wiring.
    std::variant<const tunnel::TunnelSession*, tunnel::EstablishError> vpn_connect(
        const std::string& user, const std::string& password, Ipv4 from_addr);

    std::vector<ActiveCallInfo> active_calls() const;
    std::optional<ActiveCallInfo> call_of(const std::string& peer) const;

    RunMetrics metrics() const;  // assembled from all components

    const std::vector<std::string>& trace() const { return trace_; }
    const std::vector<std::string>& service_log() const { return service_log_; }
    std::string alert_log_text() const;
    std::string mail_journal_text() const;
    std::string voicemail_journal_text() const;

    pktfilter::Chain& chain() { return chain_; }
    sentinel::Sentinel& ids() { return *sentinel_; }
    tunnel::TunnelServer& vpn() { return tunnel_; }
    sipnode::Registrar& registrar() { return registrar_; }
    notify::Sink& mail() { return mail_; }
    ivrvm::VoicemailStore& voicemail() { return vm_; }
    acl::GrantTable& grants() { return grants_; }
    const acl::AttendanceStore& store() const { return store_; }
    const dialplan::Dialplan& plan() const { return plan_; }
    const EngineOptions& options() const { return options_; }
    VirtualClock& clock() { return clock_; }

    // Where the VoiceMailMain extension for box@context lives, if any.
    std::optional<std::string> voicemail_exten(const std::string& box,
                                               const std::string& context) const;

private:
    struct CallCtx;

    void emit_event(const sentinel::SecurityEvent& ev);
    void tap_event(const pktfilter::Packet& p, const pktfilter::MatchResult& match);
    DispatchResult deliver(pktfilter::Packet& p);
    DispatchResult handle_sip(const sip::SipMessage& msg, const pktfilter::Packet& p);
    DispatchResult handle_invite(const sip::SipMessage& msg, const pktfilter::Packet& p);
    DispatchResult handle_bye(const sip::SipMessage& msg, const pktfilter::Packet& p);
    DispatchResult handle_rtp(CallCtx& call, bool from_caller, const pktfilter::Packet& p);

    void drive(CallCtx& call, dialplan::StepInput input = {});
    void ivr_dispatch(CallCtx& call, const ivrvm::IvrEvent& ev);
    void run_ivr_query(CallCtx& call);
    void begin_digit_collection(CallCtx& call);
    void finish_digit_collection(CallCtx& call);
    void complete_digits(CallCtx& call, const std::string& digits);
    void vm_password_entered(CallCtx& call, const std::string& digits);
    void dial_timeout(const std::string& call_id);
    void end_call(CallCtx& call, const std::string& reason);
    void deposit_for_missed_call(CallCtx& call);
    CallCtx* call_by_id(const std::string& id);
    CallCtx* call_with_participant_addr(Ipv4 addr);
    const confkit::PeerEntry* peer_by_registration(Ipv4 src, VTime now);
    void add_trace(const std::string& line);

    Configs configs_;
    EngineOptions options_;
    VirtualClock& clock_;

    pktfilter::Chain chain_;
    notify::Sink mail_;
    std::unique_ptr<sentinel::Sentinel> sentinel_;
    tunnel::TunnelServer tunnel_;
    sipnode::Registrar registrar_;
    ivrvm::VoicemailStore vm_;
    acl::GrantTable grants_;
    acl::AttendanceStore store_;
    dialplan::Dialplan plan_;
    ivrvm::StoreGateway gateway_;

    std::map<std::string, std::unique_ptr<CallCtx>> calls_;  // by call id
    media::RtpPortAllocator rtp_ports_;
    std::uint64_t next_call_seq_ = 1;

    RunMetrics local_metrics_;
    std::vector<std::string> trace_;
    std::vector<std::string> service_log_;
    bool services_up_ = false;
};

// Validates the five documents the way startup does; used by the runner to
// honor the terminate-on-mismatch rule.
confkit::ValidationReport validate_configs(const Configs& configs);

}  // namespace minipbx::engine

#endif
