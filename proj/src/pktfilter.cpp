#include "minipbx/pktfilter.hpp"

#include <sstream>

namespace minipbx::pktfilter {

const char* proto_name(Proto p) {
    switch (p) {
        case Proto::Tcp: return "tcp";
        case Proto::Udp: return "udp";
        case Proto::Icmp: return "icmp";
        case Proto::Any: return "all";
    }
    return "?";
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Accept: return "ACCEPT";
        case Verdict::Drop: return "DROP";
        case Verdict::Reject: return "REJECT";
    }
    return "?";
}

std::string FilterRule::text() const {
    std::ostringstream out;
    out << "-p " << proto_name(proto);
    if (dport) out << " --dport " << *dport;
    if (src) out << " --src " << src->str();
    out << " -j " << verdict_name(verdict);
    return out.str();
}

bool rule_matches(const FilterRule& r, const Packet& p) {
    if (r.proto != Proto::Any && r.proto != p.proto) return false;
    if (r.dport) {
        if (p.proto == Proto::Icmp) return false;  // dport meaningless for icmp
        if (*r.dport != p.dport) return false;
    }
    if (r.src && *r.src != p.src) return false;
    return true;
}

void Chain::insert_head(FilterRule rule) { rules_.insert(rules_.begin(), std::move(rule)); }

void Chain::append(FilterRule rule) { rules_.push_back(std::move(rule)); }

std::size_t Chain::delete_matching(const std::function<bool(const FilterRule&)>& pred) {
    std::size_t before = rules_.size();
    std::erase_if(rules_, pred);
    return before - rules_.size();
}

MatchResult Chain::evaluate(const Packet& p) const {
    for (std::size_t i = 0; i < rules_.size(); ++i)
        if (rule_matches(rules_[i], p)) return {rules_[i].verdict, int(i), &rules_[i]};
    return {default_policy_, -1, nullptr};
}

std::string Chain::dump() const {
    std::ostringstream out;
    out << "Chain " << name_ << " (policy " << verdict_name(default_policy_) << ")\n";
    for (std::size_t i = 0; i < rules_.size(); ++i)
        out << i + 1 << ' ' << rules_[i].text() << '\n';
    return out.str();
}

std::vector<FilterRule> default_policy_rules() {
    using P = Proto;
    using V = Verdict;
    auto rule = [](P proto, std::optional<std::uint16_t> dport, V verdict) {
        FilterRule r;
        r.proto = proto;
        r.dport = dport;
        r.verdict = verdict;
        return r;
    };
    return {
        rule(P::Tcp, std::nullopt, V::Drop),         // blanket tcp
        rule(P::Tcp, ports::kSsh, V::Accept),        // ssh
        rule(P::Icmp, std::nullopt, V::Accept),      // reachability probes
        rule(P::Udp, std::nullopt, V::Drop),         // blanket udp
        rule(P::Udp, ports::kSip, V::Accept),        // sip
        rule(P::Udp, ports::kMysql, V::Accept),      // mysql
        rule(P::Tcp, ports::kPptp, V::Accept),       // pptp
        rule(P::Udp, ports::kPptp, V::Accept),
        rule(P::Tcp, ports::kSmtp, V::Accept),       // smtp
        rule(P::Udp, ports::kSmtp, V::Accept),
        rule(P::Tcp, ports::kPop, V::Accept),        // pop
        rule(P::Udp, ports::kPop, V::Accept),
    };
}

Chain default_chain() {
    Chain chain;
    for (const auto& r : default_policy_rules()) chain.insert_head(r);
    return chain;
}

}  // namespace minipbx::pktfilter
