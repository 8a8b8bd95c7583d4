#include <doctest.h>

#include <map>
#include <random>
#include <vector>

#include "minipbx/sentinel.hpp"

using namespace minipbx;
using namespace minipbx::sentinel;

TEST_SUITE_BEGIN("sentinel");

namespace {

struct Rig {
    pktfilter::Chain chain = pktfilter::default_chain();
    notify::Sink mail;
    Sentinel ids;

    explicit Rig(RateRule rule = {}) : ids(rule, chain, mail) {}
};

SecurityEvent ev(EventKind kind, Ipv4 src, VTime at, const std::string& detail = "") {
    return {kind, src, at, detail};
}

const Ipv4 kSrc(10, 0, 0, 9);

}  // namespace

TEST_CASE("classify is total over the event vocabulary") {
    Rig rig;
    for (EventKind kind :
         {EventKind::AuthFailure, EventKind::UnknownUser, EventKind::RegisterAttempt,
          EventKind::PortProbe, EventKind::ConfigError, EventKind::IntegrityWarning,
          EventKind::Generic}) {
        auto alert = rig.ids.classify(ev(kind, kSrc, 0));
        CHECK(alert.level >= 0);
        CHECK(alert.level <= 15);
    }
}

TEST_CASE("default mapping levels") {
    Rig rig;
    CHECK(rig.ids.classify(ev(EventKind::AuthFailure, kSrc, 0)).level == 5);
    CHECK(rig.ids.classify(ev(EventKind::UnknownUser, kSrc, 0)).level == 9);
    CHECK(rig.ids.classify(ev(EventKind::RegisterAttempt, kSrc, 0)).level == 3);
    CHECK(rig.ids.classify(ev(EventKind::PortProbe, kSrc, 0)).level == 8);
    CHECK(rig.ids.classify(ev(EventKind::ConfigError, kSrc, 0)).level == 4);
    CHECK(rig.ids.classify(ev(EventKind::IntegrityWarning, kSrc, 0)).level == 11);
}

TEST_CASE("first contact from an unseen source classifies at the actionable floor") {
    Rig rig;
    CHECK(rig.ids.classify(ev(EventKind::Generic, kSrc, 0)).level == 8);
    rig.ids.ingest(ev(EventKind::Generic, kSrc, 0));
    CHECK(rig.ids.classify(ev(EventKind::Generic, kSrc, 1)).level == 2);
}

TEST_CASE("events mapped to level 0 are ignored outright") {
    Rig rig;
    rig.ids.set_level_override(EventKind::Generic, 0);
    auto alert = rig.ids.ingest(ev(EventKind::Generic, kSrc, 0));
    CHECK(alert.level == 0);
    CHECK(rig.ids.alert_log().empty());
    CHECK(rig.ids.blacklist().empty());
    CHECK(rig.mail.size() == 0);
}

TEST_CASE("the 11th auth failure in the window classifies as a burst") {
    Rig rig;
    Alert last;
    for (int i = 0; i < 11; ++i)
        last = rig.ids.ingest(ev(EventKind::AuthFailure, kSrc, VTime(i) * 1000));
    CHECK(last.level == 10);
}

TEST_CASE("51 events in the window escalate to the severe level") {
    Rig rig;
    Alert last;
    for (int i = 0; i < 51; ++i)
        last = rig.ids.ingest(ev(EventKind::RegisterAttempt, kSrc, VTime(i) * 100));
    CHECK(last.level == 15);
}

TEST_CASE("observe: exactly 10 events in the window emit no command") {
    Rig rig;
    for (int i = 0; i < 10; ++i) {
        auto cmd = rig.ids.observe(ev(EventKind::Generic, kSrc, VTime(i) * 1000));
        CHECK_FALSE(cmd.has_value());
    }
}

TEST_CASE("observe: the 11th event at t=59s emits the blacklist command") {
    Rig rig;
    for (int i = 0; i < 10; ++i)
        CHECK_FALSE(rig.ids.observe(ev(EventKind::Generic, kSrc, VTime(i) * 5000)).has_value());
    auto cmd = rig.ids.observe(ev(EventKind::Generic, kSrc, 59000));
    REQUIRE(cmd.has_value());
    CHECK(cmd->src == kSrc);
}

TEST_CASE("observe: 11 events spread over 120s never trigger") {
    Rig rig;
    for (int i = 0; i < 11; ++i)
        CHECK_FALSE(
            rig.ids.observe(ev(EventKind::Generic, kSrc, VTime(i) * 12000)).has_value());
}

TEST_CASE("observe emits once per episode and re-arms after the window empties") {
    Rig rig;
    int commands = 0;
    for (int i = 0; i < 30; ++i)
        if (rig.ids.observe(ev(EventKind::Generic, kSrc, VTime(i) * 100))) ++commands;
    CHECK(commands == 1);
    // window drains, then a second offense fires again
    for (int i = 0; i < 12; ++i)
        if (rig.ids.observe(ev(EventKind::Generic, kSrc, 200000 + VTime(i) * 100)))
            ++commands;
    CHECK(commands == 2);
}

TEST_CASE("observe matches a brute-force recount oracle on random streams") {
    std::mt19937 rng(123);
    RateRule rule;
    rule.threshold = 10;
    rule.window = 60000;
    Rig rig(rule);

    std::map<std::uint32_t, std::vector<VTime>> history;  // src -> all event times
    std::map<std::uint32_t, bool> episode;

    VTime t = 0;
    for (int i = 0; i < 10000; ++i) {
        t += VTime(rng() % 2000);
        Ipv4 src(10, 0, 0, std::uint8_t(rng() % 8));
        auto cmd = rig.ids.observe(ev(EventKind::Generic, src, t));

        // oracle: full recount of this src's timestamps
        auto& h = history[src.value];
        int in_window = 0;
        for (VTime past : h)
            if (past > t - rule.window) ++in_window;
        bool& ep = episode[src.value];
        if (in_window == 0) ep = false;
        h.push_back(t);
        ++in_window;
        bool expect_cmd = in_window > rule.threshold && !ep;
        if (expect_cmd) ep = true;

        if (cmd.has_value() != expect_cmd) {
            CAPTURE(i);
            CAPTURE(t);
            REQUIRE(cmd.has_value() == expect_cmd);
        }
    }
}

TEST_CASE("active response: head DROP rule, blacklist entry, one notification") {
    Rig rig;
    std::size_t rules_before = rig.chain.rules().size();
    rig.ids.active_response({kSrc, 10, "burst", "11 requests"}, 5000);

    REQUIRE(rig.chain.rules().size() == rules_before + 1);
    const auto& head = rig.chain.rules().front();
    CHECK(head.verdict == pktfilter::Verdict::Drop);
    REQUIRE(head.src.has_value());
    CHECK(*head.src == kSrc);
    CHECK(rig.ids.is_blacklisted(kSrc));
    CHECK(rig.mail.drain(notify::Category::AdminAlert).size() == 1);
    CHECK(rig.mail.drain()[0]->subject.find("10.0.0.9") != std::string::npos);
    CHECK(rig.ids.coherent_with_chain());
}

TEST_CASE("duplicate blacklisting is an idempotent no-op with an informational alert") {
    Rig rig;
    rig.ids.active_response({kSrc, 10, "burst", "r"}, 0);
    std::size_t rules = rig.chain.rules().size();
    rig.ids.active_response({kSrc, 10, "burst", "r"}, 1);
    CHECK(rig.chain.rules().size() == rules);
    CHECK(rig.ids.blacklist().size() == 1);
    CHECK(rig.mail.size() == 1);
    CHECK(rig.ids.level_counts().at(1) == 1);
    CHECK(rig.ids.coherent_with_chain());
}

TEST_CASE("unblock removes the rule and the entry coherently") {
    Rig rig;
    rig.ids.active_response({kSrc, 10, "burst", "r"}, 0);
    rig.ids.unblock(kSrc, 10);
    CHECK_FALSE(rig.ids.is_blacklisted(kSrc));
    for (const auto& r : rig.chain.rules()) CHECK(r.tag != Sentinel::blacklist_tag(kSrc));
    CHECK(rig.ids.coherent_with_chain());
}

TEST_CASE("a blacklisted source's packets all drop; others are unaffected") {
    Rig rig;
    rig.ids.active_response({kSrc, 10, "burst", "r"}, 0);

    for (std::uint32_t port : {22u, 80u, 5060u}) {
        pktfilter::Packet p;
        p.src = kSrc;
        p.proto = pktfilter::Proto::Udp;
        p.dport = std::uint16_t(port);
        CHECK(rig.chain.evaluate(p).verdict == pktfilter::Verdict::Drop);
    }
    pktfilter::Packet ok;
    ok.src = Ipv4(192, 168, 100, 36);
    ok.proto = pktfilter::Proto::Udp;
    ok.dport = 5060;
    CHECK(rig.chain.evaluate(ok).verdict == pktfilter::Verdict::Accept);
}

TEST_CASE("alert log floor: informational alerts counted but not logged") {
    Rig rig;
    rig.ids.ingest(ev(EventKind::AuthFailure, kSrc, 0));  // level 5
    CHECK(rig.ids.alert_log().empty());
    CHECK(rig.ids.level_counts().at(5) == 1);
    rig.ids.ingest(ev(EventKind::UnknownUser, kSrc, 1));  // level 9
    REQUIRE(rig.ids.alert_log().size() == 1);
    CHECK(rig.ids.alert_log()[0].level == 9);
}

TEST_CASE("alert log line format") {
    Alert a{9, Ipv4(10, 0, 0, 9), 7122, "unknown-user", "REGISTER for unknown peer mallory"};
    CHECK(a.log_line() ==
          "1970-01-01T00:00:07.122Z\t9\t10.0.0.9\tunknown-user\tREGISTER for unknown peer "
          "mallory");
}

TEST_SUITE_END();
