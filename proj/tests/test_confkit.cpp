#include <doctest.h>

#include <algorithm>
#include <random>

#include "minipbx/confkit.hpp"

using namespace minipbx;
using namespace minipbx::confkit;

TEST_SUITE_BEGIN("confkit");

TEST_CASE("sip.conf: peer block parses to a typed entry") {
    auto peers = parse_sip_conf("[harish]\ntype=friend\nsecret=1234\nhost=dynamic\ncontext=office");
    REQUIRE(peers.size() == 1);
    CHECK(peers[0].name == "harish");
    CHECK(peers[0].type == PeerType::Friend);
    CHECK(peers[0].secret == "1234");
    CHECK(peers[0].host == "dynamic");
    CHECK(peers[0].context == "office");
}

TEST_CASE("sip.conf: empty input yields no peers") {
    CHECK(parse_sip_conf("").empty());
}

TEST_CASE("sip.conf: non-digit secret is a parse error naming the line") {
    try {
        parse_sip_conf("[a]\nsecret=12x4");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("sip.conf: duplicate peer names rejected") {
    CHECK_THROWS_AS(parse_sip_conf("[a]\n[a]\n"), ParseError);
}

TEST_CASE("sip.conf: unknown keys preserved as extras, mailbox ref parsed") {
    auto peers = parse_sip_conf("[x]\nmailbox=756@vmail\nallow=gsm\n");
    REQUIRE(peers.size() == 1);
    REQUIRE(peers[0].mailbox.has_value());
    CHECK(peers[0].mailbox->box == "756");
    CHECK(peers[0].mailbox->context == "vmail");
    REQUIRE(peers[0].extras.size() == 1);
    CHECK(peers[0].extras[0].first == "allow");
}

TEST_CASE("extensions.conf: voicemail binding line") {
    auto doc = parse_extensions_conf("[vmail]\nexten => 444, 1, VoiceMailMain(756@vmail)");
    REQUIRE(doc.contexts.size() == 1);
    CHECK(doc.contexts[0].name == "vmail");
    REQUIRE(doc.contexts[0].lines.size() == 1);
    const auto& line = doc.contexts[0].lines[0];
    CHECK(line.exten == "444");
    CHECK(line.priority == 1);
    CHECK(line.op.name == "VoiceMailMain");
    CHECK(line.op.args == "756@vmail");
}

TEST_CASE("extensions.conf: empty argument list") {
    auto doc = parse_extensions_conf("[c]\nexten => 111, 1, Hangup()");
    REQUIRE(doc.contexts[0].lines.size() == 1);
    CHECK(doc.contexts[0].lines[0].op.name == "Hangup");
    CHECK(doc.contexts[0].lines[0].op.args.empty());
}

TEST_CASE("extensions.conf: the irregular-spacing corpus line parses") {
    auto doc = parse_extensions_conf("[c]\nexten => 111 , 1, Operation();");
    REQUIRE(doc.contexts[0].lines.size() == 1);
    CHECK(doc.contexts[0].lines[0].exten == "111");
    CHECK(doc.contexts[0].lines[0].op.name == "Operation");
    CHECK_FALSE(is_known_operation("Operation"));
}

TEST_CASE("extensions.conf: exten before any context is an error") {
    try {
        parse_extensions_conf("exten => 1,1,Hangup()");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
}

TEST_CASE("extensions.conf: non-integer priority and unbalanced parens rejected") {
    CHECK_THROWS_AS(parse_extensions_conf("[c]\nexten => 1,x,Hangup()"), ParseError);
    CHECK_THROWS_AS(parse_extensions_conf("[c]\nexten => 1,1,Dial(a"), ParseError);
}

TEST_CASE("voicemail.conf: corpus entry parses") {
    auto doc = parse_voicemail_conf("[vmail]\n756 => 1234, username, username@domain.com");
    const auto* boxes = doc.find_context("vmail");
    REQUIRE(boxes);
    REQUIRE(boxes->size() == 1);
    CHECK((*boxes)[0].box == "756");
    CHECK((*boxes)[0].password == "1234");
    CHECK((*boxes)[0].display_name == "username");
    CHECK((*boxes)[0].email == "username@domain.com");
}

TEST_CASE("voicemail.conf: empty context allowed") {
    auto doc = parse_voicemail_conf("[vmail]");
    const auto* boxes = doc.find_context("vmail");
    REQUIRE(boxes);
    CHECK(boxes->empty());
}

TEST_CASE("voicemail.conf: missing email field is an error") {
    CHECK_THROWS_AS(parse_voicemail_conf("[v]\n756 => 1234, u"), ParseError);
}

TEST_CASE("voicemail.conf: duplicate mailbox within a context rejected") {
    CHECK_THROWS_AS(
        parse_voicemail_conf("[v]\n756 => 1, a, a@b\n756 => 2, c, c@d"), ParseError);
}

TEST_CASE("vpn config: pool expansion is inclusive") {
    auto [cfg, creds] = parse_vpn_config(
        "localip 192.168.100.37\nremoteip 192.168.100.10-192.168.100.20",
        "u1 pptpd 4321 *\n");
    CHECK(cfg.pool_size() == 11);
    CHECK(cfg.localip.str() == "192.168.100.37");
    CHECK(creds.entries.size() == 1);
    CHECK(creds.find("u1")->secret == "4321");
}

TEST_CASE("vpn config: degenerate one-address pool") {
    auto [cfg, creds] = parse_vpn_config("localip 10.0.0.1\nremoteip 10.0.0.5-10.0.0.5", "");
    CHECK(cfg.pool_size() == 1);
}

TEST_CASE("vpn config: localip inside the pool is an error") {
    CHECK_THROWS_AS(
        parse_vpn_config("localip 10.0.0.7\nremoteip 10.0.0.5-10.0.0.9", ""), ParseError);
}

TEST_CASE("vpn config: duplicate chap user rejected") {
    CHECK_THROWS_AS(parse_vpn_config("localip 10.0.0.1\nremoteip 10.0.0.5-10.0.0.6",
                                     "u s p *\nu s q *\n"),
                    ParseError);
}

TEST_CASE("validate_cross: matching context is ok") {
    auto peers = parse_sip_conf("[a]\ncontext=office\n");
    auto doc = parse_extensions_conf("[office]\nexten => 1,1,Hangup()");
    auto report = validate_cross(peers, doc, VoicemailDoc{});
    CHECK(report.ok());
}

TEST_CASE("validate_cross: unmatched context is an error") {
    auto peers = parse_sip_conf("[a]\ncontext=office\n");
    auto doc = parse_extensions_conf("[sales]\nexten => 1,1,Hangup()");
    auto report = validate_cross(peers, doc, VoicemailDoc{});
    CHECK_FALSE(report.ok());
    REQUIRE(!report.errors().empty());
    CHECK(report.errors()[0]->message.find("sales") != std::string::npos);
}

TEST_CASE("validate_cross: dangling VoiceMailMain target is an error") {
    auto peers = parse_sip_conf("[a]\ncontext=office\n");
    auto doc = parse_extensions_conf("[office]\nexten => 4,1,VoiceMailMain(999@vmail)");
    auto vm = parse_voicemail_conf("[vmail]\n756 => 1234, u, u@d.com");
    auto report = validate_cross(peers, doc, vm);
    CHECK_FALSE(report.ok());
}

TEST_CASE("validate_cross: dangling peer mailbox is an error") {
    auto peers = parse_sip_conf("[a]\ncontext=office\nmailbox=760@vmail\n");
    auto doc = parse_extensions_conf("[office]\nexten => 1,1,Hangup()");
    auto vm = parse_voicemail_conf("[vmail]\n756 => 1234, u, u@d.com");
    CHECK_FALSE(validate_cross(peers, doc, vm).ok());
}

TEST_CASE("validate_cross: unknown operations are warnings, not errors") {
    auto peers = parse_sip_conf("[a]\ncontext=office\n");
    auto doc = parse_extensions_conf("[office]\nexten => 1,1,Swizzle(x)");
    auto report = validate_cross(peers, doc, VoicemailDoc{});
    CHECK(report.ok());
    CHECK(report.findings.size() == 1);
    CHECK(report.findings[0].severity == Severity::Warning);
}

TEST_CASE("validate_cross is order-independent over peers") {
    auto peers = parse_sip_conf(
        "[a]\ncontext=office\n[b]\ncontext=lobby\n[c]\ncontext=office\n");
    auto doc = parse_extensions_conf(
        "[office]\nexten => 1,1,Hangup()\n[lobby]\nexten => 2,1,Hangup()");
    std::mt19937 rng(7);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(peers.begin(), peers.end(), rng);
        CHECK(validate_cross(peers, doc, VoicemailDoc{}).ok());
    }
}

TEST_CASE("round-trip: bundled corpus files reparse structurally equal") {
    std::string base = MINIPBX_SOURCE_DIR "/configs/";
    auto peers = parse_sip_conf(read_file(base + "sip.conf"));
    auto peers2 = parse_sip_conf(serialize_sip_conf(peers));
    REQUIRE(peers2.size() == peers.size());
    for (std::size_t i = 0; i < peers.size(); ++i) {
        CHECK(peers2[i].name == peers[i].name);
        CHECK(peers2[i].secret == peers[i].secret);
        CHECK(peers2[i].context == peers[i].context);
        CHECK(peers2[i].mailbox == peers[i].mailbox);
        CHECK(peers2[i].extras == peers[i].extras);
    }

    auto doc = parse_extensions_conf(read_file(base + "extensions.conf"));
    CHECK(parse_extensions_conf(serialize_extensions_conf(doc)) == doc);

    auto vm = parse_voicemail_conf(read_file(base + "voicemail.conf"));
    CHECK(parse_voicemail_conf(serialize_voicemail_conf(vm)) == vm);

    auto [tunnel_cfg, creds] = parse_vpn_config(read_file(base + "pptpd.conf"),
                                                read_file(base + "chap-secrets"));
    auto [tunnel2, creds2] = parse_vpn_config(serialize_pptpd_conf(tunnel_cfg),
                                              serialize_chap_secrets(creds));
    CHECK(tunnel2.localip == tunnel_cfg.localip);
    CHECK(tunnel2.pool_first == tunnel_cfg.pool_first);
    CHECK(tunnel2.pool_last == tunnel_cfg.pool_last);
    REQUIRE(creds2.entries.size() == creds.entries.size());
    for (std::size_t i = 0; i < creds.entries.size(); ++i) {
        CHECK(creds2.entries[i].user == creds.entries[i].user);
        CHECK(creds2.entries[i].secret == creds.entries[i].secret);
    }
}

TEST_CASE("file order of exten lines is preserved") {
    auto doc = parse_extensions_conf(
        "[c]\nexten => 9,3,Hangup()\nexten => 9,1,Playback(a)\nexten => 9,2,Read(x)\n");
    REQUIRE(doc.contexts[0].lines.size() == 3);
    CHECK(doc.contexts[0].lines[0].priority == 3);
    CHECK(doc.contexts[0].lines[1].priority == 1);
    CHECK(doc.contexts[0].lines[2].priority == 2);
}

TEST_SUITE_END();
