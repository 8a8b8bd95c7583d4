#include "minipbx/sentinel.hpp"

#include <sstream>

namespace minipbx::sentinel {

const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::AuthFailure: return "auth-failure";
        case EventKind::UnknownUser: return "unknown-user";
        case EventKind::RegisterAttempt: return "register-attempt";
        case EventKind::PortProbe: return "port-probe";
        case EventKind::ConfigError: return "config-error";
        case EventKind::IntegrityWarning: return "integrity-warning";
        case EventKind::Generic: return "generic";
    }
    return "?";
}

std::string Alert::log_line() const {
    std::ostringstream out;
    out << iso8601(at) << '\t' << level << '\t' << src.str() << '\t' << rule_id << '\t'
        << description;
    return out.str();
}

Sentinel::Sentinel(RateRule rule, pktfilter::Chain& chain, notify::Sink& mail,
                   std::string admin_address)
    : rule_(rule), chain_(chain), mail_(mail), admin_address_(std::move(admin_address)) {}

void Sentinel::set_level_override(EventKind kind, int level) { overrides_[kind] = level; }

int Sentinel::base_level(EventKind kind) const {
    if (auto it = overrides_.find(kind); it != overrides_.end()) return it->second;
    switch (kind) {
        case EventKind::AuthFailure: return 5;        // missed passwords
        case EventKind::UnknownUser: return 9;        // login as unknown user
        case EventKind::RegisterAttempt: return 3;    // successful login
        case EventKind::PortProbe: return 8;          // first-time / probing activity
        case EventKind::ConfigError: return 4;        // bad configurations
        case EventKind::IntegrityWarning: return 11;  // integrity check warning
        case EventKind::Generic: return 2;            // status message
    }
    return 2;
}

int Sentinel::window_count(Ipv4 src, VTime now) const {
    auto it = windows_.find(src);
    if (it == windows_.end()) return 0;
    int n = 0;
    for (VTime t : it->second.events)
        if (t > now - rule_.window) ++n;
    return n;
}

Alert Sentinel::classify(const SecurityEvent& event) const {
    Alert a;
    a.src = event.src;
    a.at = event.at;
    a.level = base_level(event.kind);
    a.rule_id = event_kind_name(event.kind);
    a.description = event.detail.empty() ? event_kind_name(event.kind) : event.detail;
    if (a.level == 0) {
        a.rule_id = "ignore";
        return a;
    }

    // First contact from an unseen source is notable on its own.
    if (event.kind == EventKind::Generic) {
        auto it = seen_.find(event.src);
        if (it == seen_.end() || !it->second) {
            a.level = kActionableFloor;
            a.rule_id = "first-seen";
        }
    }

    int count = window_count(event.src, event.at);
    if (count > rule_.threshold * kSevereMultiplier) {
        a.level = kSevereLevel;
        a.rule_id = "flood";
        a.description = "severe request flood from " + event.src.str() + " (" +
                        std::to_string(count) + " events in window)";
    } else if (count > rule_.threshold && a.level < kBurstLevel) {
        a.level = kBurstLevel;
        a.rule_id = "burst";
        a.description = "repeated " + std::string(event_kind_name(event.kind)) + " from " +
                        event.src.str() + " (" + std::to_string(count) + " in window)";
    }
    return a;
}

std::optional<ResponseCommand> Sentinel::observe(const SecurityEvent& event) {
    auto& state = windows_[event.src];
    while (!state.events.empty() && state.events.front() <= event.at - rule_.window)
        state.events.pop_front();
    if (state.events.empty()) state.episode_active = false;  // window drained, re-arm
    state.events.push_back(event.at);

    if (int(state.events.size()) > rule_.threshold && !state.episode_active) {
        state.episode_active = true;
        ResponseCommand cmd;
        cmd.src = event.src;
        cmd.level = kBurstLevel;
        cmd.rule_id = "rate-limit";
        cmd.reason = std::to_string(state.events.size()) + " requests within " +
                     std::to_string(rule_.window / kMillisPerSecond) + "s";
        return cmd;
    }
    return std::nullopt;
}

void Sentinel::active_response(const ResponseCommand& cmd, VTime now) {
    if (blacklist_.count(cmd.src)) {
        Alert dup;
        dup.level = 1;
        dup.src = cmd.src;
        dup.at = now;
        dup.rule_id = "response-duplicate";
        dup.description = cmd.src.str() + " already blacklisted";
        ++level_counts_[dup.level];
        if (dup.level >= log_floor_) log_.push_back(dup);
        return;
    }

    pktfilter::FilterRule rule;
    rule.src = cmd.src;
    rule.verdict = pktfilter::Verdict::Drop;
    rule.tag = blacklist_tag(cmd.src);
    chain_.insert_head(rule);
    blacklist_[cmd.src] = {now, cmd.reason, cmd.level};

    notify::Notification n;
    n.to = admin_address_;
    n.at = now;
    n.category = notify::Category::AdminAlert;
    n.subject = "blacklisted " + cmd.src.str() + " (level " + std::to_string(cmd.level) + ")";
    n.body = "source: " + cmd.src.str() + "\nlevel: " + std::to_string(cmd.level) +
             "\nrule: " + cmd.rule_id + "\nreason: " + cmd.reason + "\n";
    mail_.send(std::move(n));
}

Alert Sentinel::ingest(const SecurityEvent& event) {
    // Kinds mapped to level 0 are ignored outright: no window, no log.
    if (auto it = overrides_.find(event.kind); it != overrides_.end() && it->second == 0) {
        Alert a;
        a.level = 0;
        a.src = event.src;
        a.at = event.at;
        a.rule_id = "ignore";
        a.description = event.detail;
        ++level_counts_[0];
        return a;
    }

    auto cmd = observe(event);
    Alert alert = classify(event);
    seen_[event.src] = true;
    ++level_counts_[alert.level];
    if (alert.level >= log_floor_ && alert.level > 0) log_.push_back(alert);

    if (cmd) {
        cmd->level = alert.level;
        cmd->rule_id = alert.rule_id;
        active_response(*cmd, event.at);
    }
    return alert;
}

void Sentinel::observe_quiet(const SecurityEvent& event) {
    auto cmd = observe(event);
    seen_[event.src] = true;
    if (cmd) active_response(*cmd, event.at);  // duplicate sources no-op
}

void Sentinel::unblock(Ipv4 src, VTime now) {
    auto it = blacklist_.find(src);
    if (it == blacklist_.end()) return;
    blacklist_.erase(it);
    std::string tag = blacklist_tag(src);
    chain_.delete_matching([&](const pktfilter::FilterRule& r) { return r.tag == tag; });

    Alert a;
    a.level = 2;
    a.src = src;
    a.at = now;
    a.rule_id = "unblock";
    a.description = src.str() + " removed from blacklist";
    ++level_counts_[a.level];
    if (a.level >= log_floor_) log_.push_back(a);
}

bool Sentinel::coherent_with_chain() const {
    for (const auto& [src, entry] : blacklist_) {
        bool found = false;
        for (const auto& r : chain_.rules())
            if (r.tag == blacklist_tag(src) && r.verdict == pktfilter::Verdict::Drop &&
                r.src && *r.src == src)
                found = true;
        if (!found) return false;
    }
    for (const auto& r : chain_.rules()) {
        if (r.tag.rfind("blacklist:", 0) != 0) continue;
        if (!r.src || !blacklist_.count(*r.src)) return false;
    }
    return true;
}

std::string Sentinel::blacklist_tag(Ipv4 src) { return "blacklist:" + src.str(); }

}  // namespace minipbx::sentinel
