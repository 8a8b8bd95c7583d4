#include <doctest.h>

#include <random>
#include <set>

#include "minipbx/pktfilter.hpp"

using namespace minipbx;
using namespace minipbx::pktfilter;

TEST_SUITE_BEGIN("pktfilter");

namespace {

// Independent first-match walk used as the oracle; deliberately re-derives
// the semantics instead of calling Chain::evaluate.
Verdict oracle_walk(const std::vector<FilterRule>& rules, Verdict fallback, const Packet& p) {
    for (const auto& r : rules) {
        bool proto_ok = r.proto == Proto::Any || r.proto == p.proto;
        bool port_ok = !r.dport || (p.proto != Proto::Icmp && *r.dport == p.dport);
        bool src_ok = !r.src || *r.src == p.src;
        if (proto_ok && port_ok && src_ok) return r.verdict;
    }
    return fallback;
}

Packet packet(Proto proto, std::uint16_t dport, Ipv4 src = Ipv4(10, 0, 0, 1)) {
    Packet p;
    p.src = src;
    p.proto = proto;
    p.dport = dport;
    return p;
}

}  // namespace

TEST_CASE("insert-head stacks, append queues") {
    Chain chain;
    FilterRule a{Proto::Tcp, 1, std::nullopt, Verdict::Accept, "a"};
    FilterRule b{Proto::Tcp, 2, std::nullopt, Verdict::Accept, "b"};
    chain.insert_head(a);
    chain.insert_head(b);
    CHECK(chain.rules()[0].tag == "b");
    CHECK(chain.rules()[1].tag == "a");

    Chain chain2;
    chain2.append(a);
    chain2.append(b);
    CHECK(chain2.rules()[0].tag == "a");
    CHECK(chain2.rules()[1].tag == "b");
}

TEST_CASE("delete-matching removes only the predicate's rules") {
    Chain chain;
    FilterRule keep{Proto::Udp, std::nullopt, Ipv4(10, 0, 0, 1), Verdict::Drop, ""};
    FilterRule gone{Proto::Udp, std::nullopt, Ipv4(10, 0, 0, 9), Verdict::Drop, ""};
    chain.append(keep);
    chain.append(gone);
    chain.append(keep);
    auto removed = chain.delete_matching(
        [](const FilterRule& r) { return r.src && *r.src == Ipv4(10, 0, 0, 9); });
    CHECK(removed == 1);
    REQUIRE(chain.rules().size() == 2);
    for (const auto& r : chain.rules()) CHECK(*r.src == Ipv4(10, 0, 0, 1));
}

TEST_CASE("bundled policy: admitted service set is exact over every port") {
    Chain chain = default_chain();
    const std::set<std::uint16_t> tcp_open = {ports::kSsh, ports::kSmtp, ports::kPop,
                                              ports::kPptp};
    const std::set<std::uint16_t> udp_open = {ports::kSmtp, ports::kPop, ports::kPptp,
                                              ports::kSip, ports::kMysql};

    // spot-check the listed behaviors first
    CHECK(chain.evaluate(packet(Proto::Tcp, 22)).verdict == Verdict::Accept);
    CHECK(chain.evaluate(packet(Proto::Tcp, 80)).verdict == Verdict::Drop);
    CHECK(chain.evaluate(packet(Proto::Udp, 5060)).verdict == Verdict::Accept);
    CHECK(chain.evaluate(packet(Proto::Udp, 53)).verdict == Verdict::Drop);
    CHECK(chain.evaluate(packet(Proto::Icmp, 0)).verdict == Verdict::Accept);
    CHECK(chain.evaluate(packet(Proto::Udp, 1723)).verdict == Verdict::Accept);

    int mismatches = 0;
    for (std::uint32_t port = 0; port <= 65535; ++port) {
        auto p = std::uint16_t(port);
        bool tcp_accept =
            chain.evaluate(packet(Proto::Tcp, p)).verdict == Verdict::Accept;
        bool udp_accept =
            chain.evaluate(packet(Proto::Udp, p)).verdict == Verdict::Accept;
        if (tcp_accept != (tcp_open.count(p) > 0)) ++mismatches;
        if (udp_accept != (udp_open.count(p) > 0)) ++mismatches;
    }
    CHECK(mismatches == 0);

    // the secure-mail variants stay closed; only plain SMTP/POP are served
    CHECK(chain.evaluate(packet(Proto::Tcp, ports::kSsmtp)).verdict == Verdict::Drop);
    CHECK(chain.evaluate(packet(Proto::Tcp, ports::kPop3s)).verdict == Verdict::Drop);
}

TEST_CASE("evaluate matches the brute-force oracle on the bundled policy") {
    Chain chain = default_chain();
    for (std::uint32_t port = 0; port <= 65535; ++port) {
        for (Proto proto : {Proto::Tcp, Proto::Udp}) {
            auto p = packet(proto, std::uint16_t(port));
            auto got = chain.evaluate(p).verdict;
            auto want = oracle_walk(chain.rules(), chain.default_policy(), p);
            if (got != want) {
                CAPTURE(port);
                CHECK(got == want);
            }
        }
    }
    auto icmp = packet(Proto::Icmp, 0);
    CHECK(chain.evaluate(icmp).verdict ==
          oracle_walk(chain.rules(), chain.default_policy(), icmp));
}

TEST_CASE("first-match agrees with the oracle on randomized chains") {
    std::mt19937 rng(42);
    auto rand_proto = [&] {
        switch (rng() % 4) {
            case 0: return Proto::Tcp;
            case 1: return Proto::Udp;
            case 2: return Proto::Icmp;
            default: return Proto::Any;
        }
    };
    auto rand_verdict = [&] {
        switch (rng() % 3) {
            case 0: return Verdict::Accept;
            case 1: return Verdict::Drop;
            default: return Verdict::Reject;
        }
    };
    for (int trial = 0; trial < 200; ++trial) {
        Chain chain("INPUT", rand_verdict());
        int n = int(rng() % 50);
        for (int i = 0; i < n; ++i) {
            FilterRule r;
            r.proto = rand_proto();
            if (rng() % 2) r.dport = std::uint16_t(rng() % 16);
            if (rng() % 2) r.src = Ipv4(10, 0, 0, std::uint8_t(rng() % 4));
            r.verdict = rand_verdict();
            if (rng() % 2)
                chain.insert_head(r);
            else
                chain.append(r);
        }
        for (int i = 0; i < 50; ++i) {
            Packet p;
            p.proto = rand_proto();
            if (p.proto == Proto::Any) p.proto = Proto::Tcp;
            p.dport = std::uint16_t(rng() % 16);
            p.src = Ipv4(10, 0, 0, std::uint8_t(rng() % 4));
            CHECK(chain.evaluate(p).verdict ==
                  oracle_walk(chain.rules(), chain.default_policy(), p));
        }
    }
}

TEST_CASE("a head DROP on a source overrides every prior rule") {
    Chain chain = default_chain();
    Ipv4 bad(10, 0, 0, 9);
    FilterRule block;
    block.src = bad;
    block.verdict = Verdict::Drop;
    chain.insert_head(block);

    for (std::uint32_t port : {22u, 80u, 5060u, 3306u}) {
        CHECK(chain.evaluate(packet(Proto::Tcp, std::uint16_t(port), bad)).verdict ==
              Verdict::Drop);
        CHECK(chain.evaluate(packet(Proto::Udp, std::uint16_t(port), bad)).verdict ==
              Verdict::Drop);
    }
    // other sources keep their verdicts
    CHECK(chain.evaluate(packet(Proto::Udp, 5060)).verdict == Verdict::Accept);
}

TEST_CASE("chain dump is stable golden text") {
    Chain chain;
    chain.append({Proto::Tcp, 22, std::nullopt, Verdict::Accept, ""});
    chain.append({Proto::Udp, std::nullopt, Ipv4(10, 0, 0, 9), Verdict::Drop, ""});
    CHECK(chain.dump() ==
          "Chain INPUT (policy ACCEPT)\n"
          "1 -p tcp --dport 22 -j ACCEPT\n"
          "2 -p udp --src 10.0.0.9 -j DROP\n");
}

TEST_SUITE_END();
