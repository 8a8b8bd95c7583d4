#ifndef MINIPBX_PKTFILTER_HPP
#define MINIPBX_PKTFILTER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "minipbx/net.hpp"
#include "minipbx/vtime.hpp"

namespace minipbx::pktfilter {

enum class Proto { Tcp, Udp, Icmp, Any };
enum class Verdict { Accept, Drop, Reject };

const char* proto_name(Proto p);
const char* verdict_name(Verdict v);

// One match predicate plus its outcome. `tag` is bookkeeping for rule owners
// (the sentinel tags its blacklist rules, the engine its per-call RTP rules).
struct FilterRule {
    Proto proto = Proto::Any;
    std::optional<std::uint16_t> dport;  // tcp/udp only
    std::optional<Ipv4> src;
    Verdict verdict = Verdict::Accept;
    std::string tag;

    std::string text() const;  // one iptables-like line
};

// Simulated datagram flowing tunnel -> filter -> sentinel -> sipnode.
struct Packet {
    Ipv4 src;
    Proto proto = Proto::Udp;
    std::uint16_t dport = 0;
    std::vector<std::uint8_t> payload;
    VTime arrival = 0;
};

struct MatchResult {
    Verdict verdict;
    int rule_index = -1;  // -1 means the default policy applied
    const FilterRule* rule = nullptr;
};

// Ordered INPUT chain with first-match evaluation. -I inserts at the head,
// which is load-bearing for the bundled policy: with append semantics the
// blanket drops would shadow every later accept.
class Chain {
public:
    explicit Chain(std::string name = "INPUT", Verdict default_policy = Verdict::Accept)
        : name_(std::move(name)), default_policy_(default_policy) {}

    void insert_head(FilterRule rule);
    void append(FilterRule rule);
    std::size_t delete_matching(const std::function<bool(const FilterRule&)>& pred);

    MatchResult evaluate(const Packet& p) const;

    const std::string& name() const { return name_; }
    Verdict default_policy() const { return default_policy_; }
    const std::vector<FilterRule>& rules() const { return rules_; }

    std::string dump() const;  // one rule per line, golden-file testable

private:
    std::string name_;
    Verdict default_policy_;
    std::vector<FilterRule> rules_;
};

bool rule_matches(const FilterRule& r, const Packet& p);

// The bundled firewall policy rows in their listed order; apply each via
// insert_head to obtain the working chain.
std::vector<FilterRule> default_policy_rules();

Chain default_chain();

}  // namespace minipbx::pktfilter

#endif
