#include "minipbx/engine.hpp"

#include <algorithm>
#include <sstream>

#include "minipbx/digest.hpp"

namespace minipbx::engine {

using pktfilter::Packet;
using pktfilter::Verdict;
using sentinel::EventKind;
using sentinel::SecurityEvent;

std::int64_t RunMetrics::get(const std::string& name) const {
    auto it = counters.find(name);
    return it == counters.end() ? 0 : it->second;
}

std::string RunMetrics::report() const {
    std::ostringstream out;
    for (const auto& [name, value] : counters) out << name << '\t' << value << '\n';
    return out.str();
}

confkit::ValidationReport validate_configs(const Configs& configs) {
    return confkit::validate_cross(configs.peers, configs.dialplan_doc, configs.voicemail);
}

// --- CallCtx ---------------------------------------------------------------

struct Pbx::CallCtx {
    std::string id;
    std::string caller;  // peer name, or guest-<addr>
    bool caller_is_guest = false;
    Ipv4 caller_addr;
    std::uint16_t caller_contact_port = 0;
    std::string context;
    std::string dialed_exten;
    sipnode::CallSession session;
    dialplan::ExecState exec;

    enum class Await { None, PlanDigits, IvrDigits, VmPassword, Dial };
    Await await = Await::None;
    std::string digit_buffer;
    VirtualClock::TimerId digit_timer = 0;

    std::string dial_target;
    VirtualClock::TimerId dial_timer = 0;

    std::optional<ivrvm::IvrSession> ivr;
    std::string vm_box, vm_context;

    std::uint16_t caller_rtp_port = 0;
    std::uint16_t callee_rtp_port = 0;
    struct StreamCheck {
        bool started = false;
        std::uint32_t ssrc = 0;
        std::uint16_t expect_seq = 0;
        std::uint32_t expect_ts = 0;
    };
    StreamCheck caller_stream, callee_stream;

    bool ended = false;
};

// --- construction ------------------------------------------------------------

Pbx::Pbx(Configs configs, EngineOptions options, VirtualClock& clock)
    : configs_(std::move(configs)),
      options_(std::move(options)),
      clock_(clock),
      chain_(pktfilter::default_chain()),
      sentinel_(std::make_unique<sentinel::Sentinel>(options_.rate, chain_, mail_)),
      tunnel_(configs_.tunnel, configs_.credentials),
      registrar_(configs_.peers,
                 [this](const SecurityEvent& ev) { emit_event(ev); }),
      vm_(configs_.voicemail),
      plan_(dialplan::Dialplan::compile(configs_.dialplan_doc,
                                        validate_configs(configs_))) {
    sentinel_->set_log_floor(options_.alert_log_floor);

    // The policy admits SIP on the standard port; follow an overridden
    // listen port so the service stays reachable.
    if (options_.sip_port != ports::kSip) {
        pktfilter::FilterRule sip_rule;
        sip_rule.proto = pktfilter::Proto::Udp;
        sip_rule.dport = options_.sip_port;
        sip_rule.verdict = pktfilter::Verdict::Accept;
        sip_rule.tag = "sip-port";
        chain_.insert_head(sip_rule);
    }

    if (options_.guest_context.empty() && !configs_.dialplan_doc.contexts.empty())
        options_.guest_context = configs_.dialplan_doc.contexts.front().name;

    // The IVR service principal holds exactly SELECT on the attendance scope.
    acl::Statement seed;
    seed.kind = acl::Statement::Kind::Grant;
    seed.privileges = {acl::Privilege::Select};
    seed.scope = options_.attendance_scope;
    seed.principal = options_.ivr_principal;
    grants_.apply(seed);

    gateway_ = ivrvm::make_acl_gateway(options_.ivr_principal, store_, grants_,
                                       options_.attendance_scope);
}

Pbx::~Pbx() = default;

void Pbx::add_trace(const std::string& line) {
    trace_.push_back(iso8601(clock_.now()) + " " + line);
}

void Pbx::start_services() {
    for (const char* svc : {"sip", "store", "notifier"}) {
        service_log_.push_back(std::string("start ") + svc);
        add_trace(std::string("service ") + svc + " started");
    }
    services_up_ = true;
}

void Pbx::stop_services() {
    if (!services_up_) return;
    for (const char* svc : {"notifier", "store", "sip"}) {
        service_log_.push_back(std::string("stop ") + svc);
        add_trace(std::string("service ") + svc + " stopped");
    }
    services_up_ = false;
}

void Pbx::emit_event(const SecurityEvent& ev) { sentinel_->ingest(ev); }

void Pbx::seed_student(const std::string& id, const std::string& password, int attendance) {
    store_.upsert({id, md5_hex(password), attendance});
}

void Pbx::load_store(const acl::AttendanceStore& records) { store_ = records; }

std::vector<std::string> Pbx::apply_grant_statement(const std::string& text) {
    auto stmt = acl::parse_statement(text);
    return grants_.apply(stmt);
}

void Pbx::unblock(Ipv4 src) { sentinel_->unblock(src, clock_.now()); }

std::variant<const tunnel::TunnelSession*, tunnel::EstablishError> Pbx::vpn_connect(
    const std::string& user, const std::string& password, Ipv4 from_addr) {
    auto result = tunnel_.establish(user, password, clock_.now());
    if (auto* err = std::get_if<tunnel::EstablishError>(&result)) {
        if (*err == tunnel::EstablishError::BadCredentials)
            emit_event({EventKind::AuthFailure, from_addr, clock_.now(),
                        "bad vpn credentials for user " + user});
        return *err;
    }
    auto* session = std::get<tunnel::TunnelSession*>(result);
    add_trace("vpn session for " + user + " leased " + session->leased.str());
    return const_cast<const tunnel::TunnelSession*>(session);
}

// --- pipeline ---------------------------------------------------------------

void Pbx::tap_event(const Packet& p, const pktfilter::MatchResult& match) {
    if (match.verdict == Verdict::Accept) return;
    if (match.rule && match.rule->tag.rfind("blacklist:", 0) == 0) {
        // keeps the offender's window full without flooding the alert log
        sentinel_->observe_quiet({EventKind::Generic, p.src, clock_.now(),
                                  "blocked packet from blacklisted source"});
        return;
    }
    std::ostringstream detail;
    detail << "probe to " << pktfilter::proto_name(p.proto) << '/' << p.dport;
    emit_event({EventKind::PortProbe, p.src, clock_.now(), detail.str()});
}

DispatchResult Pbx::dispatch(Packet p) {
    local_metrics_.inc("packets-ingested");
    p.arrival = clock_.now();

    // Tunneled clients arrive from their leased address with sealed payloads.
    bool unseal_failed = false;
    if (auto* session = tunnel_.session_at_mut(p.src)) {
        auto opened = tunnel_.open(*session, p.payload);
        if (auto* payload = std::get_if<std::vector<std::uint8_t>>(&opened))
            p.payload = std::move(*payload);
        else
            unseal_failed = true;
    }

    auto match = chain_.evaluate(p);
    tap_event(p, match);

    switch (match.verdict) {
        case Verdict::Drop:
            local_metrics_.inc("packets-dropped");
            return {Outcome::Dropped, match.verdict, std::nullopt};
        case Verdict::Reject:
            local_metrics_.inc("packets-rejected");
            return {Outcome::Refused, match.verdict, std::nullopt};
        case Verdict::Accept:
            break;
    }
    local_metrics_.inc("packets-accepted");

    if (unseal_failed) {
        emit_event({EventKind::Generic, p.src, clock_.now(),
                    "tunnel frame rejected (desync or tamper)"});
        local_metrics_.inc("packets-undecodable");
        return {Outcome::Error, match.verdict, std::nullopt};
    }
    return deliver(p);
}

DispatchResult Pbx::deliver(Packet& p) {
    if (p.dport == options_.sip_port && p.proto == pktfilter::Proto::Udp) {
        std::string text(p.payload.begin(), p.payload.end());
        sip::SipMessage msg;
        try {
            msg = sip::decode(text);
        } catch (const sip::CodecError& e) {
            emit_event({EventKind::Generic, p.src, clock_.now(),
                        std::string("malformed SIP payload: ") + e.what()});
            local_metrics_.inc("packets-undecodable");
            return {Outcome::Error, Verdict::Accept, std::nullopt};
        }
        return handle_sip(msg, p);
    }

    // RTP to a per-call session port.
    for (auto& [id, call] : calls_) {
        if (call->ended || call->session.state != sipnode::CallState::Active) continue;
        if (p.dport == call->caller_rtp_port) return handle_rtp(*call, true, p);
        if (p.dport == call->callee_rtp_port) return handle_rtp(*call, false, p);
    }

    // Accepted by policy but nothing is listening here (ssh, smtp, ...).
    std::ostringstream detail;
    detail << "packet to unbound service port " << pktfilter::proto_name(p.proto) << '/'
           << p.dport;
    emit_event({EventKind::Generic, p.src, clock_.now(), detail.str()});
    local_metrics_.inc("packets-unbound");
    return {Outcome::Delivered, Verdict::Accept, std::nullopt};
}

DispatchResult Pbx::handle_sip(const sip::SipMessage& msg, const Packet& p) {
    if (msg.kind == sip::SipMessage::Kind::Status) {
        add_trace("sip status " + std::to_string(msg.code) + " from " + p.src.str());
        return {Outcome::Delivered, Verdict::Accept, std::nullopt};
    }

    using sip::Method;
    switch (msg.method) {
        case Method::Register: {
            std::uint16_t contact_port = options_.sip_port;
            if (auto contact = msg.header("Contact")) {
                try {
                    auto uri = sip::decode("OPTIONS " + *contact + " SIP/2.0\r\n\r\n").uri;
                    if (uri.port) contact_port = *uri.port;
                } catch (const sip::CodecError&) {
                }
            }
            auto result = registrar_.handle_register(msg, p.src, contact_port, clock_.now());
            switch (result.outcome) {
                case sipnode::RegisterOutcome::Ok:
                    local_metrics_.inc("registrations-ok");
                    add_trace("register ok for " + msg.uri.user);
                    break;
                case sipnode::RegisterOutcome::BadDigest:
                case sipnode::RegisterOutcome::UnknownPeer:
                    local_metrics_.inc("registrations-failed");
                    break;
                case sipnode::RegisterOutcome::Challenged:
                    break;
            }
            return {Outcome::Delivered, Verdict::Accept, sip::encode(result.response)};
        }
        case Method::Invite:
            return handle_invite(msg, p);
        case Method::Ack:
            return {Outcome::Delivered, Verdict::Accept, std::nullopt};
        case Method::Bye:
            return handle_bye(msg, p);
        case Method::Options:
        case Method::Subscribe:
        case Method::Notify:
            // Answered but intentionally inert; no presence logic behind them.
            return {Outcome::Delivered, Verdict::Accept,
                    sip::encode(sip::SipMessage::status(200))};
    }
    return {Outcome::Delivered, Verdict::Accept, std::nullopt};
}

const confkit::PeerEntry* Pbx::peer_by_registration(Ipv4 src, VTime now) {
    for (const auto& reg : registrar_.registrations(now))
        if (reg.addr == src) return registrar_.find_peer(reg.peer);
    return nullptr;
}

DispatchResult Pbx::handle_invite(const sip::SipMessage& msg, const Packet& p) {
    const std::string exten = msg.uri.user;

    const confkit::PeerEntry* caller_peer = peer_by_registration(p.src, clock_.now());
    std::string caller = caller_peer ? caller_peer->name : "guest-" + p.src.str();
    std::string context = caller_peer && !caller_peer->context.empty()
                              ? caller_peer->context
                              : options_.guest_context;

    if (!plan_.has_exten(context, exten))
        return {Outcome::Delivered, Verdict::Accept,
                sip::encode(sip::SipMessage::status(404))};

    if (!caller_peer) {
        // Guests only reach voicemail retrieval; its own password gate applies.
        const auto* lines = plan_.lines(context, exten);
        bool vm_exten = std::any_of(lines->begin(), lines->end(), [](const auto& l) {
            std::string n = l.op.name;
            std::transform(n.begin(), n.end(), n.begin(), ::tolower);
            return n == "voicemailmain";
        });
        if (!vm_exten) {
            emit_event({EventKind::Generic, p.src, clock_.now(),
                        "INVITE from unregistered source refused"});
            return {Outcome::Delivered, Verdict::Accept,
                    sip::encode(sip::SipMessage::status(403))};
        }
    }

    auto ctx = std::make_unique<CallCtx>();
    if (auto call_id = msg.header("Call-ID"))
        ctx->id = *call_id;
    else
        ctx->id = "call-" + std::to_string(next_call_seq_);
    ++next_call_seq_;
    if (calls_.count(ctx->id))
        return {Outcome::Delivered, Verdict::Accept,
                sip::encode(sip::SipMessage::status(403))};

    ctx->caller = caller;
    ctx->caller_is_guest = caller_peer == nullptr;
    ctx->caller_addr = p.src;
    ctx->context = context;
    ctx->dialed_exten = exten;
    ctx->session = {ctx->id, caller, "", sipnode::CallState::Inviting};
    ctx->exec = dialplan::make_state(context, exten);

    const auto* lines = plan_.lines(context, exten);
    std::string first_op = lines->front().op.name;
    std::transform(first_op.begin(), first_op.end(), first_op.begin(), ::tolower);
    bool pbx_answers = first_op != "dial";

    CallCtx& call = *ctx;
    calls_[ctx->id] = std::move(ctx);
    add_trace("invite from " + caller + " to exten " + exten);

    // The PBX itself is the endpoint for IVR/voicemail/playback flows;
    // Dial flows stay unanswered until the callee picks up.
    if (pbx_answers) {
        sipnode::session_event(call.session, sipnode::CallEvent::Ring);
        sipnode::session_event(call.session, sipnode::CallEvent::Answer);
    }

    drive(call);

    if (!pbx_answers) return {Outcome::Delivered, Verdict::Accept, std::nullopt};
    return {Outcome::Delivered, Verdict::Accept, sip::encode(sip::SipMessage::status(200))};
}

DispatchResult Pbx::handle_bye(const sip::SipMessage& msg, const Packet& p) {
    CallCtx* call = nullptr;
    if (auto call_id = msg.header("Call-ID")) call = call_by_id(*call_id);
    if (!call) call = call_with_participant_addr(p.src);
    if (!call || call->ended)
        return {Outcome::Delivered, Verdict::Accept,
                sip::encode(sip::SipMessage::status(404))};

    if (call->session.state == sipnode::CallState::Active) {
        if (call->await == CallCtx::Await::Dial) {
            dialplan::StepInput input;
            input.dial_answered = true;
            call->await = CallCtx::Await::None;
            dialplan::step(plan_, call->exec, input);  // closes the pending Dial
        }
        end_call(*call, "bye from " + p.src.str());
        return {Outcome::Delivered, Verdict::Accept,
                sip::encode(sip::SipMessage::status(200))};
    }

    auto err = sipnode::session_event(call->session, sipnode::CallEvent::Bye);
    add_trace("protocol error: " + err->message());
    return {Outcome::Delivered, Verdict::Accept, sip::encode(sip::SipMessage::status(403))};
}

DispatchResult Pbx::handle_rtp(CallCtx& call, bool from_caller, const Packet& p) {
    media::RtpFrame frame;
    try {
        frame = media::rtp_decode(p.payload);
    } catch (const media::RtpCodecError& e) {
        emit_event({EventKind::Generic, p.src, clock_.now(),
                    std::string("bad RTP frame: ") + e.what()});
        local_metrics_.inc("packets-undecodable");
        return {Outcome::Error, Verdict::Accept, std::nullopt};
    }

    auto& stream = from_caller ? call.caller_stream : call.callee_stream;
    if (!stream.started) {
        stream.started = true;
        stream.ssrc = frame.ssrc;
        stream.expect_seq = std::uint16_t(frame.seq + 1);
        stream.expect_ts = frame.timestamp + media::kTimestampStep;
    } else {
        bool ok = frame.ssrc == stream.ssrc && frame.seq == stream.expect_seq &&
                  frame.timestamp == stream.expect_ts;
        if (!ok) {
            emit_event({EventKind::IntegrityWarning, p.src, clock_.now(),
                        "rtp stream discontinuity on call " + call.id});
            local_metrics_.inc("rtp-discontinuities");
        }
        stream.expect_seq = std::uint16_t(frame.seq + 1);
        stream.expect_ts = frame.timestamp + media::kTimestampStep;
    }
    local_metrics_.inc("rtp-frames-delivered");
    return {Outcome::Delivered, Verdict::Accept, std::nullopt};
}

// --- call driving ------------------------------------------------------------

Pbx::CallCtx* Pbx::call_by_id(const std::string& id) {
    auto it = calls_.find(id);
    return it == calls_.end() ? nullptr : it->second.get();
}

Pbx::CallCtx* Pbx::call_with_participant_addr(Ipv4 addr) {
    for (auto& [id, call] : calls_) {
        if (call->ended) continue;
        if (call->caller_addr == addr) return call.get();
        if (!call->dial_target.empty()) {
            if (auto* reg = registrar_.find_registration(call->dial_target, clock_.now()))
                if (reg->addr == addr) return call.get();
        }
    }
    return nullptr;
}

void Pbx::begin_digit_collection(CallCtx& call) {
    call.digit_buffer.clear();
    if (call.digit_timer) clock_.cancel(call.digit_timer);
    std::string id = call.id;
    call.digit_timer = clock_.schedule(clock_.now() + dialplan::kInterDigitTimeout,
                                       [this, id] {
                                           if (auto* c = call_by_id(id))
                                               if (!c->ended) finish_digit_collection(*c);
                                       });
}

void Pbx::dtmf(Ipv4 client_addr, char digit) {
    if (!media::valid_dtmf_digit(digit)) return;  // digit set is closed
    for (auto& [id, call] : calls_) {
        if (call->ended || call->caller_addr != client_addr) continue;
        if (call->await != CallCtx::Await::PlanDigits &&
            call->await != CallCtx::Await::IvrDigits &&
            call->await != CallCtx::Await::VmPassword)
            continue;
        if (digit == dialplan::kReadTerminator) {
            finish_digit_collection(*call);
            return;
        }
        call->digit_buffer.push_back(digit);
        if (call->digit_timer) clock_.cancel(call->digit_timer);
        std::string cid = call->id;
        call->digit_timer = clock_.schedule(clock_.now() + dialplan::kInterDigitTimeout,
                                            [this, cid] {
                                                if (auto* c = call_by_id(cid))
                                                    if (!c->ended) finish_digit_collection(*c);
                                            });
        return;
    }
}

void Pbx::finish_digit_collection(CallCtx& call) {
    if (call.digit_timer) {
        clock_.cancel(call.digit_timer);
        call.digit_timer = 0;
    }
    std::string digits = call.digit_buffer;
    call.digit_buffer.clear();
    complete_digits(call, digits);
}

void Pbx::complete_digits(CallCtx& call, const std::string& digits) {
    auto await = call.await;
    call.await = CallCtx::Await::None;
    switch (await) {
        case CallCtx::Await::PlanDigits: {
            dialplan::StepInput input;
            input.digits = digits;
            drive(call, input);
            break;
        }
        case CallCtx::Await::IvrDigits:
            // a drained inter-digit timer with nothing buffered is caller
            // inactivity, not input
            if (digits.empty())
                ivr_dispatch(call, {ivrvm::IvrEvent::Kind::Timeout, "", 0});
            else
                ivr_dispatch(call, {ivrvm::IvrEvent::Kind::Digits, digits, 0});
            break;
        case CallCtx::Await::VmPassword:
            vm_password_entered(call, digits);
            break;
        default:
            break;
    }
}

void Pbx::drive(CallCtx& call, dialplan::StepInput input) {
    while (!call.ended) {
        dialplan::Action action = dialplan::step(plan_, call.exec, input);
        input = {};
        if (call.exec.runtime_error) {
            add_trace("dialplan error on call " + call.id + ": " + *call.exec.runtime_error);
            call.exec.runtime_error.reset();
        }

        if (std::holds_alternative<dialplan::Hangup>(action)) {
            end_call(call, "plan hangup");
            return;
        }
        if (const auto* play = std::get_if<dialplan::Play>(&action)) {
            add_trace("call " + call.id + " play " + play->file);
            continue;
        }
        if (const auto* say = std::get_if<dialplan::SayDigits>(&action)) {
            add_trace("call " + call.id + " say-digits " + say->digits);
            continue;
        }
        if (std::holds_alternative<dialplan::Goto>(action)) {
            add_trace("call " + call.id + " goto");
            continue;
        }
        if (const auto* read = std::get_if<dialplan::Read>(&action)) {
            add_trace("call " + call.id + " play " + read->prompt);
            call.await = CallCtx::Await::PlanDigits;
            begin_digit_collection(call);
            return;
        }
        if (const auto* dial = std::get_if<dialplan::Dial>(&action)) {
            call.dial_target = dial->target;
            call.session.callee = dial->target;
            const auto* reg = registrar_.find_registration(dial->target, clock_.now());
            if (!reg) {
                // offline callee: straight to the no-answer path
                add_trace("call " + call.id + " dial " + dial->target + " (offline)");
                sipnode::session_event(call.session, sipnode::CallEvent::Timeout);
                local_metrics_.inc("calls-no-answer");
                deposit_for_missed_call(call);
                input.dial_answered = false;
                continue;
            }
            add_trace("call " + call.id + " dial " + dial->target + " (ringing)");
            sipnode::session_event(call.session, sipnode::CallEvent::Ring);
            call.await = CallCtx::Await::Dial;
            std::string id = call.id;
            call.dial_timer =
                clock_.schedule(clock_.now() + dial->timeout, [this, id] { dial_timeout(id); });
            return;
        }
        if (const auto* query = std::get_if<dialplan::Query>(&action)) {
            if (query->statement == options_.attendance_query_template) {
                call.ivr = ivrvm::IvrSession{};
                call.ivr->retry_cap = options_.retry_cap;
                ivr_dispatch(call, {ivrvm::IvrEvent::Kind::Start, "", 0});
                return;
            }
            add_trace("call " + call.id + " query " + query->statement + " (no template)");
            input.query_result = "";
            continue;
        }
        if (const auto* vm = std::get_if<dialplan::VoiceMail>(&action)) {
            std::string box = vm->box;
            std::string vctx = vm->context;
            if (box.empty()) {
                // VoiceMailMain() with no target: the caller's own mailbox.
                const auto* peer =
                    call.caller_is_guest ? nullptr : registrar_.find_peer(call.caller);
                if (!peer || !peer->mailbox) {
                    add_trace("dialplan error on call " + call.id + ": no mailbox for caller");
                    end_call(call, "voicemail target unresolved");
                    return;
                }
                box = peer->mailbox->box;
                vctx = peer->mailbox->context;
            }
            if (!vm_.mailbox(box, vctx)) {
                add_trace("dialplan error on call " + call.id + ": voicemail box " + box + "@" +
                          vctx + " unresolved");
                end_call(call, "voicemail target unresolved");
                return;
            }
            call.vm_box = box;
            call.vm_context = vctx;
            add_trace("call " + call.id + " play " + ivrvm::prompts::kVmPassword);
            call.await = CallCtx::Await::VmPassword;
            begin_digit_collection(call);
            return;
        }
    }
}

void Pbx::ivr_dispatch(CallCtx& call, const ivrvm::IvrEvent& ev) {
    if (!call.ivr || call.ended) return;
    auto [actions, next] = ivrvm::run_ivr(*call.ivr, ev);
    *call.ivr = next;

    for (const auto& action : actions) {
        if (const auto* play = std::get_if<dialplan::Play>(&action)) {
            add_trace("call " + call.id + " play " + play->file);
        } else if (const auto* say = std::get_if<dialplan::SayDigits>(&action)) {
            add_trace("call " + call.id + " say-digits " + say->digits);
            local_metrics_.inc("ivr-readouts");
        } else if (const auto* read = std::get_if<dialplan::Read>(&action)) {
            add_trace("call " + call.id + " play " + read->prompt);
            call.await = CallCtx::Await::IvrDigits;
            begin_digit_collection(call);
            return;
        } else if (std::holds_alternative<dialplan::Query>(action)) {
            run_ivr_query(call);
            return;
        } else if (std::holds_alternative<dialplan::Hangup>(action)) {
            end_call(call, "ivr done");
            return;
        }
    }
}

void Pbx::run_ivr_query(CallCtx& call) {
    const std::string id = call.ivr->entered_id;
    const std::string pw = call.ivr->entered_pw;

    auto auth = ivrvm::authenticate(id, pw, gateway_);
    if (std::holds_alternative<ivrvm::AuthError>(auth)) {
        emit_event({EventKind::ConfigError, call.caller_addr, clock_.now(),
                    "attendance store unavailable (ivr principal denied)"});
        ivr_dispatch(call, {ivrvm::IvrEvent::Kind::ServiceError, "", 0});
        return;
    }
    if (!std::get<bool>(auth)) {
        add_trace("call " + call.id + " ivr auth failed for id " + id);
        ivr_dispatch(call, {ivrvm::IvrEvent::Kind::QueryFail, "", 0});
        return;
    }

    auto result = acl::query_attendance(options_.ivr_principal, id, store_, grants_,
                                        options_.attendance_scope);
    if (const auto* value = std::get_if<int>(&result)) {
        ivrvm::IvrEvent ev;
        ev.kind = ivrvm::IvrEvent::Kind::QueryOk;
        ev.value = *value;
        ivr_dispatch(call, ev);
        return;
    }
    if (std::get<acl::QueryError>(result) == acl::QueryError::Denied) {
        emit_event({EventKind::ConfigError, call.caller_addr, clock_.now(),
                    "attendance query denied (ivr principal lacks SELECT)"});
        ivr_dispatch(call, {ivrvm::IvrEvent::Kind::ServiceError, "", 0});
        return;
    }
    // unknown student id collapses onto the bad-password branch
    ivr_dispatch(call, {ivrvm::IvrEvent::Kind::QueryFail, "", 0});
}

void Pbx::vm_password_entered(CallCtx& call, const std::string& digits) {
    auto result = vm_.retrieve(call.vm_box, call.vm_context, digits);
    if (const auto* msgs = std::get_if<std::vector<ivrvm::VmMessage>>(&result)) {
        add_trace("call " + call.id + " play " + ivrvm::prompts::kVmYouHave);
        add_trace("call " + call.id + " say-digits " + std::to_string(msgs->size()));
        for (const auto& m : *msgs)
            add_trace("call " + call.id + " play message " + m.payload_ref);
        drive(call);
        return;
    }
    if (std::get<ivrvm::VmError>(result) == ivrvm::VmError::WrongPassword) {
        emit_event({EventKind::AuthFailure, call.caller_addr, clock_.now(),
                    "bad voicemail password for box " + call.vm_box});
        add_trace("call " + call.id + " play " + ivrvm::prompts::kVmBadPassword);
        drive(call);
        return;
    }
    add_trace("dialplan error on call " + call.id + ": voicemail box unresolved");
    end_call(call, "voicemail target unresolved");
}

bool Pbx::answer_call(const std::string& callee_peer) {
    for (auto& [id, call] : calls_) {
        if (call->ended || call->await != CallCtx::Await::Dial) continue;
        if (call->dial_target != callee_peer) continue;

        if (call->dial_timer) {
            clock_.cancel(call->dial_timer);
            call->dial_timer = 0;
        }
        sipnode::session_event(call->session, sipnode::CallEvent::Answer);

        call->caller_rtp_port = rtp_ports_.next();
        call->callee_rtp_port = rtp_ports_.next();
        for (std::uint16_t port : {call->caller_rtp_port, call->callee_rtp_port}) {
            pktfilter::FilterRule rule;
            rule.proto = pktfilter::Proto::Udp;
            rule.dport = port;
            rule.verdict = pktfilter::Verdict::Accept;
            rule.tag = "rtp:" + call->id;
            chain_.insert_head(rule);
        }
        add_trace("sip 200 OK to " + call->caller + " (call " + call->id + " answered by " +
                  callee_peer + ")");
        return true;
    }
    return false;
}

void Pbx::dial_timeout(const std::string& call_id) {
    CallCtx* call = call_by_id(call_id);
    if (!call || call->ended || call->await != CallCtx::Await::Dial) return;
    call->await = CallCtx::Await::None;
    call->dial_timer = 0;
    add_trace("call " + call->id + " dial timeout (" + call->dial_target + " not answering)");
    sipnode::session_event(call->session, sipnode::CallEvent::Timeout);
    local_metrics_.inc("calls-no-answer");
    deposit_for_missed_call(*call);
    dialplan::StepInput input;
    input.dial_answered = false;
    drive(*call, input);
}

void Pbx::deposit_for_missed_call(CallCtx& call) {
    const auto* callee = registrar_.find_peer(call.dial_target);
    if (!callee || !callee->mailbox) {
        add_trace("call " + call.id + " no mailbox for " + call.dial_target +
                  "; voicemail skipped");
        return;
    }
    auto receipt = vm_.deposit(callee->mailbox->box, callee->mailbox->context, call.caller,
                               "vm-" + call.id, clock_.now(), mail_);
    if (std::holds_alternative<ivrvm::DepositReceipt>(receipt))
        add_trace("call " + call.id + " voicemail deposited to " + callee->mailbox->box + "@" +
                  callee->mailbox->context);
    else
        add_trace("call " + call.id + " voicemail deposit failed");
}

void Pbx::end_call(CallCtx& call, const std::string& reason) {
    if (call.ended) return;
    call.ended = true;
    if (call.session.state == sipnode::CallState::Active) {
        sipnode::session_event(call.session, sipnode::CallEvent::Bye);
        local_metrics_.inc("calls-completed");
    }
    if (call.digit_timer) {
        clock_.cancel(call.digit_timer);
        call.digit_timer = 0;
    }
    if (call.dial_timer) {
        clock_.cancel(call.dial_timer);
        call.dial_timer = 0;
    }
    std::string tag = "rtp:" + call.id;
    chain_.delete_matching([&](const pktfilter::FilterRule& r) { return r.tag == tag; });
    call.await = CallCtx::Await::None;
    add_trace("call " + call.id + " ended (" + reason + ")");
}

std::vector<ActiveCallInfo> Pbx::active_calls() const {
    std::vector<ActiveCallInfo> out;
    for (const auto& [id, call] : calls_) {
        if (call->ended) continue;
        out.push_back({call->id, call->caller, call->dial_target, call->session.state,
                       call->caller_rtp_port, call->callee_rtp_port});
    }
    return out;
}

std::optional<ActiveCallInfo> Pbx::call_of(const std::string& peer) const {
    for (const auto& [id, call] : calls_) {
        if (call->ended) continue;
        if (call->caller == peer || call->dial_target == peer)
            return ActiveCallInfo{call->id, call->caller, call->dial_target,
                                  call->session.state, call->caller_rtp_port,
                                  call->callee_rtp_port};
    }
    return std::nullopt;
}

std::optional<std::string> Pbx::voicemail_exten(const std::string& box,
                                                const std::string& context) const {
    for (const auto& ctx : configs_.dialplan_doc.contexts) {
        for (const auto& line : ctx.lines) {
            std::string n = line.op.name;
            std::transform(n.begin(), n.end(), n.begin(), ::tolower);
            if (n != "voicemailmain") continue;
            if (line.op.args == box + "@" + context) return line.exten;
        }
    }
    return std::nullopt;
}

RunMetrics Pbx::metrics() const {
    RunMetrics m = local_metrics_;
    for (const auto& [level, count] : sentinel_->level_counts())
        m.counters["alerts-level-" + std::to_string(level)] = std::int64_t(count);
    m.counters["blacklist-size"] = std::int64_t(sentinel_->blacklist().size());
    m.counters["notifications-admin"] =
        std::int64_t(mail_.drain(notify::Category::AdminAlert).size());
    m.counters["notifications-voicemail"] =
        std::int64_t(mail_.drain(notify::Category::VoicemailNotice).size());
    m.counters["voicemail-deposits"] = std::int64_t(vm_.total_deposits());
    for (const char* key : {"packets-ingested", "packets-accepted", "packets-dropped",
                            "packets-rejected", "registrations-ok", "registrations-failed",
                            "calls-completed", "calls-no-answer"})
        m.counters.try_emplace(key, 0);
    return m;
}

std::string Pbx::alert_log_text() const {
    std::ostringstream out;
    for (const auto& alert : sentinel_->alert_log()) out << alert.log_line() << '\n';
    return out.str();
}

std::string Pbx::mail_journal_text() const {
    std::ostringstream out;
    mail_.write_journal(out);
    return out.str();
}

std::string Pbx::voicemail_journal_text() const { return vm_.journal(); }

}  // namespace minipbx::engine
