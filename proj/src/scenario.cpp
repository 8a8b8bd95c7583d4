#include "minipbx/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "minipbx/confkit.hpp"
#include "minipbx/digest.hpp"
#include "minipbx/sip.hpp"

namespace minipbx::scenario {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

VTime seconds_to_vtime(const std::string& text) {
    double secs = std::stod(text);
    return VTime(std::llround(secs * double(kMillisPerSecond)));
}

const char* const kConfigKeys[] = {"sip-conf", "extensions-conf", "voicemail-conf",
                                   "pptpd-conf", "chap-secrets"};

}  // namespace

Scenario Scenario::parse(const std::string& text, const std::string& base_dir) {
    Scenario sc;
    sc.base_dir = base_dir;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (line[first] == '#' || line[first] == ';') continue;
        auto tokens = tokenize(line);
        const std::string& key = tokens[0];

        if (key == "AT") {
            if (tokens.size() < 3)
                throw ScenarioError("line " + std::to_string(lineno) +
                                    ": AT needs a time and a verb");
            Step step;
            try {
                step.at = seconds_to_vtime(tokens[1]);
            } catch (const std::exception&) {
                throw ScenarioError("line " + std::to_string(lineno) + ": bad time '" +
                                    tokens[1] + "'");
            }
            step.verb = tokens[2];
            step.args.assign(tokens.begin() + 3, tokens.end());
            step.line = lineno;
            sc.steps.push_back(std::move(step));
            continue;
        }
        if (key == "name") {
            sc.name = tokens.size() > 1 ? tokens[1] : "";
            continue;
        }
        if (std::find_if(std::begin(kConfigKeys), std::end(kConfigKeys),
                         [&](const char* k) { return key == k; }) != std::end(kConfigKeys)) {
            if (tokens.size() != 2)
                throw ScenarioError("line " + std::to_string(lineno) + ": " + key +
                                    " needs a path");
            sc.config_paths[key] = tokens[1];
            continue;
        }
        if (key == "option") {
            if (tokens.size() != 3)
                throw ScenarioError("line " + std::to_string(lineno) +
                                    ": option needs name and value");
            sc.options[tokens[1]] = tokens[2];
            continue;
        }
        if (key == "student") {
            if (tokens.size() != 4)
                throw ScenarioError("line " + std::to_string(lineno) +
                                    ": student needs id, password, attendance");
            StudentSeed seed{tokens[1], tokens[2], std::stoi(tokens[3])};
            if (seed.attendance < 0 || seed.attendance > 100)
                throw ScenarioError("line " + std::to_string(lineno) +
                                    ": attendance must be 0..100");
            sc.students.push_back(std::move(seed));
            continue;
        }
        if (key == "client") {
            if (tokens.size() < 2)
                throw ScenarioError("line " + std::to_string(lineno) +
                                    ": client needs a peer name");
            ClientDecl decl;
            decl.peer = tokens[1];
            if (tokens.size() > 2) {
                auto addr = Ipv4::parse(tokens[2]);
                if (!addr)
                    throw ScenarioError("line " + std::to_string(lineno) +
                                        ": bad client address '" + tokens[2] + "'");
                decl.addr = addr;
            }
            sc.clients.push_back(std::move(decl));
            continue;
        }
        throw ScenarioError("line " + std::to_string(lineno) + ": unknown directive '" + key +
                            "'");
    }
    std::stable_sort(sc.steps.begin(), sc.steps.end(),
                     [](const Step& a, const Step& b) { return a.at < b.at; });
    return sc;
}

Scenario Scenario::load(const std::string& path) {
    std::string text = confkit::read_file(path);
    return parse(text, fs::path(path).parent_path().string());
}

std::vector<AttackStep> attack_generate(const AttackSpec& spec) {
    std::vector<AttackStep> out;
    switch (spec.kind) {
        case AttackSpec::Kind::RegisterFlood: {
            for (int i = 0; i < spec.count; ++i) {
                AttackStep s;
                s.type = AttackStep::Type::RegisterNoAuth;
                s.user = spec.flood_user;
                s.offset = spec.count > 1 ? (spec.window * i) / (spec.count - 1) : 0;
                out.push_back(s);
            }
            break;
        }
        case AttackSpec::Kind::PortScan: {
            int i = 0;
            for (int port = spec.port_lo; port <= spec.port_hi; ++port, ++i) {
                AttackStep s;
                s.type = AttackStep::Type::RawProbe;
                s.port = std::uint16_t(port);
                s.offset = VTime(i) * 10;  // 10 ms per probe, ascending
                out.push_back(s);
            }
            break;
        }
        case AttackSpec::Kind::BruteForce: {
            bool vm_mode = spec.target.find('@') != std::string::npos;
            for (int i = 0; i < spec.attempts; ++i) {
                VTime base = VTime(i) * kMillisPerSecond;
                if (vm_mode) {
                    std::string call_id = "bf-" + std::to_string(i + 1);
                    out.push_back({base, AttackStep::Type::VmInvite, "", 0, call_id, ""});
                    out.push_back(
                        {base + 100, AttackStep::Type::VmDigits, "", 0, call_id, "0000#"});
                    out.push_back({base + 200, AttackStep::Type::VmBye, "", 0, call_id, ""});
                } else {
                    AttackStep s;
                    s.type = AttackStep::Type::RegisterWrongSecret;
                    s.user = spec.target;
                    s.offset = base;
                    out.push_back(s);
                }
            }
            break;
        }
    }
    return out;
}

// --- runner --------------------------------------------------------------

namespace {

struct SimClient {
    std::string peer;
    Ipv4 addr;
    std::uint16_t contact_port = 0;
    std::string secret;
    bool registered = false;
    bool tunneled = false;
    Ipv4 leased;
    tunnel::Rc4 seal_cipher;  // client -> server
    std::string active_call_id;
    // media emission state
    bool streaming = false;
    media::MediaSession stream;
    std::uint16_t stream_dport = 0;
    VirtualClock::TimerId media_timer = 0;

    Ipv4 wire_addr() const { return tunneled ? leased : addr; }
};

struct Runner {
    const Scenario& sc;
    const RunnerOptions& opts;
    VirtualClock clock;
    std::unique_ptr<engine::Pbx> pbx;
    std::map<std::string, SimClient> clients;
    media::SsrcAllocator ssrcs;
    VTime end_time = 0;
    bool failed = false;
    std::string first_failure;
    std::uint64_t call_seq = 1;

    explicit Runner(const Scenario& s, const RunnerOptions& o) : sc(s), opts(o) {}

    void fail(const Step& step, const std::string& why) {
        if (failed) return;
        failed = true;
        first_failure = "step at " + iso8601(step.at) + " (line " +
                        std::to_string(step.line) + "): " + why;
    }

    SimClient* client(const std::string& name) {
        auto it = clients.find(name);
        return it == clients.end() ? nullptr : &it->second;
    }

    std::vector<std::uint8_t> wire_bytes(SimClient& c, const std::string& payload) {
        std::vector<std::uint8_t> bytes(payload.begin(), payload.end());
        if (c.tunneled) bytes = tunnel::seal_frame(c.seal_cipher, bytes);
        return bytes;
    }

    engine::DispatchResult send_sip(SimClient& c, const sip::SipMessage& msg) {
        pktfilter::Packet p;
        p.src = c.wire_addr();
        p.proto = pktfilter::Proto::Udp;
        p.dport = pbx->options().sip_port;
        p.payload = wire_bytes(c, sip::encode(msg));
        return pbx->dispatch(std::move(p));
    }

    std::optional<sip::SipMessage> response_of(const engine::DispatchResult& r) {
        if (!r.response) return std::nullopt;
        return sip::decode(*r.response);
    }

    sip::SipMessage register_message(const SimClient& c) {
        auto msg = sip::SipMessage::request(
            sip::Method::Register,
            {c.peer, pbx->options().server_addr.str(), std::nullopt});
        msg.with_header("From", "sip:" + c.peer + "@" + pbx->options().server_addr.str());
        msg.with_header("Call-ID", "reg-" + c.peer + "-" + std::to_string(call_seq++));
        msg.with_header("Contact",
                        "sip:" + c.peer + "@" + c.addr.str() + ":" +
                            std::to_string(c.contact_port));
        return msg;
    }

    // The 401-then-200 digest dance.
    bool do_register(SimClient& c, const std::string& secret) {
        auto r1 = send_sip(c, register_message(c));
        auto resp1 = response_of(r1);
        if (!resp1 || resp1->code != 401) return false;
        auto nonce = resp1->header("Nonce");
        if (!nonce) return false;
        auto msg = register_message(c);
        msg.with_header("Authorization",
                        sip::make_authorization(
                            c.peer, *nonce, sip::compute_digest(c.peer, secret, *nonce)));
        auto r2 = send_sip(c, msg);
        auto resp2 = response_of(r2);
        bool ok = resp2 && resp2->code == 200;
        c.registered = ok;
        return ok;
    }

    void start_stream(SimClient& c, std::uint16_t dport) {
        c.streaming = true;
        c.stream = media::MediaSession{ssrcs.next(), 9933, 3550780, 0};
        c.stream_dport = dport;
        schedule_frame(c.peer);
    }

    void schedule_frame(const std::string& peer) {
        SimClient* c = client(peer);
        if (!c || !c->streaming) return;
        c->media_timer =
            clock.schedule(clock.now() + media::kFramePacing, [this, peer] { emit_frame(peer); });
    }

    void emit_frame(const std::string& peer) {
        SimClient* c = client(peer);
        if (!c || !c->streaming || clock.now() > end_time) return;
        std::vector<std::uint8_t> payload(media::kGsmFrameBytes, 0x5a);
        auto frame = media::next_frame(c->stream, std::move(payload));
        pktfilter::Packet p;
        p.src = c->wire_addr();
        p.proto = pktfilter::Proto::Udp;
        p.dport = c->stream_dport;
        auto bytes = media::rtp_encode(frame);
        if (c->tunneled) bytes = tunnel::seal_frame(c->seal_cipher, bytes);
        p.payload = std::move(bytes);
        pbx->dispatch(std::move(p));
        schedule_frame(peer);
    }

    void stop_stream(SimClient& c) {
        c.streaming = false;
        if (c.media_timer) {
            clock.cancel(c.media_timer);
            c.media_timer = 0;
        }
    }

    void execute(const Step& step);
    void execute_attack(const Step& step);
    void execute_assert(const Step& step);
    void run_attack_step(const AttackStep& a, Ipv4 src, const std::string& vm_exten);
    int run();
};

void Runner::run_attack_step(const AttackStep& a, Ipv4 src, const std::string& vm_exten) {
    switch (a.type) {
        case AttackStep::Type::RegisterNoAuth: {
            auto msg = sip::SipMessage::request(
                sip::Method::Register, {a.user, pbx->options().server_addr.str(), std::nullopt});
            msg.with_header("From", "sip:" + a.user + "@" + pbx->options().server_addr.str());
            pktfilter::Packet p;
            p.src = src;
            p.proto = pktfilter::Proto::Udp;
            p.dport = pbx->options().sip_port;
            std::string text = sip::encode(msg);
            p.payload.assign(text.begin(), text.end());
            pbx->dispatch(std::move(p));
            break;
        }
        case AttackStep::Type::RegisterWrongSecret: {
            // challenge first, then answer it with a digest over a wrong secret
            SimClient fake;
            fake.peer = a.user;
            fake.addr = src;
            fake.contact_port = 5060;
            do_register(fake, "000000");
            break;
        }
        case AttackStep::Type::RawProbe: {
            pktfilter::Packet p;
            p.src = src;
            p.proto = pktfilter::Proto::Tcp;
            p.dport = a.port;
            pbx->dispatch(std::move(p));
            break;
        }
        case AttackStep::Type::VmInvite: {
            auto msg = sip::SipMessage::request(
                sip::Method::Invite, {vm_exten, pbx->options().server_addr.str(), std::nullopt});
            msg.with_header("Call-ID", a.call_id);
            pktfilter::Packet p;
            p.src = src;
            p.proto = pktfilter::Proto::Udp;
            p.dport = pbx->options().sip_port;
            std::string text = sip::encode(msg);
            p.payload.assign(text.begin(), text.end());
            pbx->dispatch(std::move(p));
            break;
        }
        case AttackStep::Type::VmDigits: {
            for (char d : a.digits) pbx->dtmf(src, d);
            break;
        }
        case AttackStep::Type::VmBye: {
            auto msg = sip::SipMessage::request(
                sip::Method::Bye, {"server", pbx->options().server_addr.str(), std::nullopt});
            msg.with_header("Call-ID", a.call_id);
            pktfilter::Packet p;
            p.src = src;
            p.proto = pktfilter::Proto::Udp;
            p.dport = pbx->options().sip_port;
            std::string text = sip::encode(msg);
            p.payload.assign(text.begin(), text.end());
            pbx->dispatch(std::move(p));
            break;
        }
    }
}

void Runner::execute_attack(const Step& step) {
    if (step.args.size() < 2) {
        fail(step, "attack needs a kind and source");
        return;
    }
    auto src = Ipv4::parse(step.args[1]);
    if (!src) {
        fail(step, "bad attack source '" + step.args[1] + "'");
        return;
    }

    AttackSpec spec;
    spec.src = *src;
    const std::string& kind = step.args[0];
    std::string vm_exten = "444";
    if (kind == "register-flood") {
        if (step.args.size() < 4) {
            fail(step, "register-flood needs count and window seconds");
            return;
        }
        spec.kind = AttackSpec::Kind::RegisterFlood;
        spec.count = std::stoi(step.args[2]);
        spec.window = seconds_to_vtime(step.args[3]);
        if (step.args.size() > 4) spec.flood_user = step.args[4];
    } else if (kind == "port-scan") {
        if (step.args.size() < 4) {
            fail(step, "port-scan needs a port range");
            return;
        }
        spec.kind = AttackSpec::Kind::PortScan;
        spec.port_lo = std::stoi(step.args[2]);
        spec.port_hi = std::stoi(step.args[3]);
    } else if (kind == "brute-force") {
        if (step.args.size() < 4) {
            fail(step, "brute-force needs a target and attempt count");
            return;
        }
        spec.kind = AttackSpec::Kind::BruteForce;
        spec.target = step.args[2];
        spec.attempts = std::stoi(step.args[3]);
        auto at = spec.target.find('@');
        if (at != std::string::npos) {
            auto exten = pbx->voicemail_exten(spec.target.substr(0, at),
                                              spec.target.substr(at + 1));
            if (exten) vm_exten = *exten;
        }
    } else {
        fail(step, "unknown attack kind '" + kind + "'");
        return;
    }

    for (const auto& a : attack_generate(spec)) {
        Ipv4 attack_src = spec.src;
        clock.schedule(clock.now() + a.offset, [this, a, attack_src, vm_exten] {
            if (!failed) run_attack_step(a, attack_src, vm_exten);
        });
    }
}

void Runner::execute_assert(const Step& step) {
    if (step.args.size() < 2) {
        fail(step, "assert needs a name and value");
        return;
    }
    const std::string& what = step.args[0];
    if (what == "blacklisted" || what == "not-blacklisted") {
        auto src = Ipv4::parse(step.args[1]);
        if (!src) {
            fail(step, "bad address '" + step.args[1] + "'");
            return;
        }
        bool expected = what == "blacklisted";
        if (pbx->ids().is_blacklisted(*src) != expected)
            fail(step, step.args[1] + (expected ? " is not blacklisted" : " is blacklisted"));
        return;
    }
    if (what == "trace-contains") {
        std::string needle;
        for (std::size_t i = 1; i < step.args.size(); ++i) {
            if (i > 1) needle += ' ';
            needle += step.args[i];
        }
        for (const auto& line : pbx->trace())
            if (line.find(needle) != std::string::npos) return;
        fail(step, "trace does not contain '" + needle + "'");
        return;
    }
    std::int64_t expected;
    try {
        expected = std::stoll(step.args[1]);
    } catch (const std::exception&) {
        fail(step, "bad assert value '" + step.args[1] + "'");
        return;
    }
    std::int64_t actual = pbx->metrics().get(what);
    if (actual != expected)
        fail(step, "metric " + what + " is " + std::to_string(actual) + ", expected " +
                       std::to_string(expected));
}

void Runner::execute(const Step& step) {
    if (failed) return;
    if (opts.echo)
        std::cout << iso8601(step.at) << " " << step.verb << '\n';

    const std::string& verb = step.verb;
    if (verb == "register") {
        SimClient* c = step.args.empty() ? nullptr : client(step.args[0]);
        if (!c) {
            fail(step, "unknown client");
            return;
        }
        if (!do_register(*c, c->secret)) fail(step, "registration failed for " + c->peer);
    } else if (verb == "call") {
        if (step.args.size() < 2) {
            fail(step, "call needs client and extension");
            return;
        }
        SimClient* c = client(step.args[0]);
        if (!c) {
            fail(step, "unknown client");
            return;
        }
        std::string call_id = "c" + std::to_string(call_seq++);
        auto msg = sip::SipMessage::request(
            sip::Method::Invite, {step.args[1], pbx->options().server_addr.str(), std::nullopt});
        msg.with_header("From", "sip:" + c->peer + "@" + c->addr.str());
        msg.with_header("Call-ID", call_id);
        c->active_call_id = call_id;
        send_sip(*c, msg);
    } else if (verb == "answer") {
        SimClient* c = step.args.empty() ? nullptr : client(step.args[0]);
        if (!c) {
            fail(step, "unknown client");
            return;
        }
        if (!pbx->answer_call(c->peer)) {
            fail(step, "no ringing call for " + c->peer);
            return;
        }
        auto info = pbx->call_of(c->peer);
        if (info && info->state == sipnode::CallState::Active) {
            c->active_call_id = info->id;
            if (SimClient* caller = client(info->caller))
                start_stream(*caller, info->caller_rtp_port);
            start_stream(*c, info->callee_rtp_port);
        }
    } else if (verb == "bye") {
        SimClient* c = step.args.empty() ? nullptr : client(step.args[0]);
        if (!c) {
            fail(step, "unknown client");
            return;
        }
        auto info = pbx->call_of(c->peer);
        auto msg = sip::SipMessage::request(
            sip::Method::Bye, {"server", pbx->options().server_addr.str(), std::nullopt});
        if (info) msg.with_header("Call-ID", info->id);
        auto r = send_sip(*c, msg);
        if (info) {
            if (SimClient* caller = client(info->caller)) stop_stream(*caller);
            if (SimClient* callee = client(info->callee)) stop_stream(*callee);
        }
        auto resp = response_of(r);
        if (!resp || resp->code != 200) fail(step, "bye was not answered 200");
    } else if (verb == "dtmf") {
        if (step.args.size() < 2) {
            fail(step, "dtmf needs client and digits");
            return;
        }
        SimClient* c = client(step.args[0]);
        if (!c) {
            fail(step, "unknown client");
            return;
        }
        for (char d : step.args[1]) pbx->dtmf(c->wire_addr(), d);
    } else if (verb == "vpn") {
        if (step.args.size() < 3) {
            fail(step, "vpn needs client, user and password");
            return;
        }
        SimClient* c = client(step.args[0]);
        if (!c) {
            fail(step, "unknown client");
            return;
        }
        auto result = pbx->vpn_connect(step.args[1], step.args[2], c->addr);
        if (auto* session = std::get_if<const tunnel::TunnelSession*>(&result)) {
            c->tunneled = true;
            c->leased = (*session)->leased;
            auto key = tunnel::derive_key(step.args[1], step.args[2]);
            c->seal_cipher.rekey(key.data(), key.size());
        }
    } else if (verb == "attack") {
        execute_attack(step);
    } else if (verb == "grant" || verb == "revoke") {
        std::string text;
        for (std::size_t i = 0; i < step.args.size(); ++i) {
            if (i) text += ' ';
            text += step.args[i];
        }
        try {
            pbx->apply_grant_statement(text);
        } catch (const acl::StatementError& e) {
            fail(step, std::string("statement rejected: ") + e.what());
        }
    } else if (verb == "unblock") {
        auto src = step.args.empty() ? std::nullopt : Ipv4::parse(step.args[0]);
        if (!src) {
            fail(step, "unblock needs an address");
            return;
        }
        pbx->unblock(*src);
    } else if (verb == "assert") {
        execute_assert(step);
    } else {
        fail(step, "unknown verb '" + verb + "'");
        return;
    }

    if (!pbx->ids().coherent_with_chain())
        fail(step, "blacklist/chain coherence violated");
}

int Runner::run() {
    engine::Configs configs;
    if (auto err = load_configs(sc, configs)) {
        first_failure = *err;
        return kExitConfigInvalid;
    }
    auto report = engine::validate_configs(configs);
    if (!report.ok()) {
        std::ostringstream msg;
        msg << "config validation failed:";
        for (const auto* f : report.errors()) msg << "\n  " << f->file << ": " << f->message;
        first_failure = msg.str();
        return kExitConfigInvalid;
    }

    engine::EngineOptions options;
    auto opt_int = [&](const char* name, int fallback) {
        auto it = sc.options.find(name);
        return it == sc.options.end() ? fallback : std::stoi(it->second);
    };
    options.rate.threshold = opt_int("rate-threshold", options.rate.threshold);
    options.rate.window =
        VTime(opt_int("rate-window", int(options.rate.window / kMillisPerSecond))) *
        kMillisPerSecond;
    options.retry_cap = opt_int("retry-cap", options.retry_cap);
    options.alert_log_floor = opt_int("alert-floor", options.alert_log_floor);
    options.sip_port = std::uint16_t(opt_int("sip-port", options.sip_port));
    if (auto it = sc.options.find("server-addr"); it != sc.options.end()) {
        auto addr = Ipv4::parse(it->second);
        if (addr) options.server_addr = *addr;
    }

    pbx = std::make_unique<engine::Pbx>(std::move(configs), options, clock);
    pbx->start_services();

    if (opts.attendance_db) {
        try {
            auto store = acl::AttendanceStore::load(confkit::read_file(*opts.attendance_db));
            pbx->load_store(store);
        } catch (const std::exception& e) {
            first_failure = std::string("attendance db: ") + e.what();
            return kExitConfigInvalid;
        }
    }
    for (const auto& seed : sc.students)
        pbx->seed_student(seed.id, seed.password, seed.attendance);

    std::uint32_t next_client_addr = Ipv4(192, 168, 100, 100).value;
    std::uint16_t next_contact_port = 46153;  // matches the capture flavor
    for (const auto& decl : sc.clients) {
        SimClient c;
        c.peer = decl.peer;
        c.addr = decl.addr.value_or(Ipv4(next_client_addr));
        if (!decl.addr) ++next_client_addr;
        c.contact_port = next_contact_port;
        next_contact_port = std::uint16_t(next_contact_port + 2);
        if (const auto* peer = pbx->registrar().find_peer(decl.peer)) c.secret = peer->secret;
        clients[decl.peer] = std::move(c);
    }

    end_time = 0;
    for (const auto& step : sc.steps) end_time = std::max(end_time, step.at);

    for (const auto& step : sc.steps)
        clock.schedule(step.at, [this, &step] { execute(step); });

    while (clock.run_next()) {
    }

    pbx->stop_services();
    return failed ? kExitAssertFailed : kExitOk;
}

}  // namespace

std::optional<std::string> load_configs(const Scenario& sc, engine::Configs& out) {
    auto path_of = [&](const char* key) -> std::optional<std::string> {
        auto it = sc.config_paths.find(key);
        if (it == sc.config_paths.end()) return std::nullopt;
        fs::path p(it->second);
        if (p.is_relative() && !sc.base_dir.empty()) p = fs::path(sc.base_dir) / p;
        return p.string();
    };
    try {
        if (auto p = path_of("sip-conf"))
            out.peers = confkit::parse_sip_conf(confkit::read_file(*p), *p);
        if (auto p = path_of("extensions-conf"))
            out.dialplan_doc = confkit::parse_extensions_conf(confkit::read_file(*p), *p);
        if (auto p = path_of("voicemail-conf"))
            out.voicemail = confkit::parse_voicemail_conf(confkit::read_file(*p), *p);
        auto pptpd = path_of("pptpd-conf");
        auto chap = path_of("chap-secrets");
        if (pptpd && chap) {
            auto [cfg, creds] = confkit::parse_vpn_config(
                confkit::read_file(*pptpd), confkit::read_file(*chap), *pptpd, *chap);
            out.tunnel = cfg;
            out.credentials = std::move(creds);
        } else {
            out.tunnel = {Ipv4(192, 168, 100, 37), Ipv4(192, 168, 100, 10),
                          Ipv4(192, 168, 100, 20)};
        }
    } catch (const confkit::ParseError& e) {
        return std::string("config parse error: ") + e.what();
    } catch (const std::runtime_error& e) {
        return std::string("config load error: ") + e.what();
    }
    return std::nullopt;
}

RunResult run_scenario(const Scenario& sc, const RunnerOptions& options) {
    Runner runner(sc, options);
    RunResult result;
    result.exit_code = runner.run();
    result.failure = runner.first_failure;
    result.out_dir = options.out_dir;

    if (result.exit_code != kExitConfigInvalid && runner.pbx) {
        result.metrics = runner.pbx->metrics();
        if (options.write_outputs) {
            fs::create_directories(options.out_dir);
            auto write = [&](const std::optional<std::string>& override_path,
                             const char* name, const std::string& text) {
                fs::path path = override_path ? fs::path(*override_path)
                                              : fs::path(options.out_dir) / name;
                if (path.has_parent_path()) fs::create_directories(path.parent_path());
                std::ofstream f(path, std::ios::binary);
                f << text;
            };
            write(options.alert_log, "alert.log", runner.pbx->alert_log_text());
            write(options.mail_journal, "mail.journal", runner.pbx->mail_journal_text());
            write(options.voicemail_journal, "voicemail.journal",
                  runner.pbx->voicemail_journal_text());
            write(options.metrics_file, "metrics.txt", result.metrics.report());
            write(std::nullopt, "vpn-sessions.tsv", runner.pbx->vpn().table_dump());
            std::ostringstream trace;
            for (const auto& line : runner.pbx->trace()) trace << line << '\n';
            write(std::nullopt, "trace.log", trace.str());
        }
    }
    return result;
}

RunResult run_scenario_file(const std::string& path, const RunnerOptions& options) {
    Scenario sc = Scenario::load(path);
    return run_scenario(sc, options);
}

}  // namespace minipbx::scenario
