#ifndef MINIPBX_SENTINEL_HPP
#define MINIPBX_SENTINEL_HPP

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "minipbx/net.hpp"
#include "minipbx/notify.hpp"
#include "minipbx/pktfilter.hpp"
#include "minipbx/vtime.hpp"

namespace minipbx::sentinel {

enum class EventKind {
    AuthFailure,
    UnknownUser,
    RegisterAttempt,  // benign successful login
    PortProbe,
    ConfigError,
    IntegrityWarning,
    Generic,
};

const char* event_kind_name(EventKind k);

struct SecurityEvent {
    EventKind kind = EventKind::Generic;
    Ipv4 src;
    VTime at = 0;
    std::string detail;
};

// Classified event on the 0-15 scale. Levels 8-15 are actionable, 0-7
// informational.
struct Alert {
    int level = 0;
    Ipv4 src;
    VTime at = 0;
    std::string rule_id;
    std::string description;

    std::string log_line() const;  // tab-separated
};

struct RateRule {
    int threshold = 10;                 // strictly-more-than triggers
    VTime window = 60 * kMillisPerSecond;
};

struct ResponseCommand {
    Ipv4 src;
    int level = 0;
    std::string rule_id;
    std::string reason;
};

struct BlacklistEntry {
    VTime since = 0;
    std::string reason;
    int alert_level = 0;
};

using Blacklist = std::map<Ipv4, BlacklistEntry>;

inline constexpr int kActionableFloor = 8;
inline constexpr int kSevereLevel = 15;
inline constexpr int kBurstLevel = 10;
inline constexpr int kSevereMultiplier = 5;

// Log-based IDS/IPS over the pipeline's event stream. Single writer of the
// blacklist and the only issuer of chain mutations.
class Sentinel {
public:
    Sentinel(RateRule rule, pktfilter::Chain& chain, notify::Sink& mail,
             std::string admin_address = "admin@minipbx.local");

    // Level mapping for `event` given the current per-src window. Total over
    // the event vocabulary; overridable per kind.
    Alert classify(const SecurityEvent& event) const;

    // Updates the per-src sliding window; emits a blacklist command when the
    // in-window count strictly exceeds the threshold, once per offense
    // episode (re-arms only after the window empties).
    std::optional<ResponseCommand> observe(const SecurityEvent& event);

    // Inserts the DROP rule at the chain head, records the blacklist entry
    // and notifies the administrator. Duplicate sources are a no-op with an
    // informational alert.
    void active_response(const ResponseCommand& cmd, VTime now);

    // observe + classify + log + respond; the pipeline entry point.
    Alert ingest(const SecurityEvent& event);

    // Window bookkeeping only, no alert: used for traffic already blocked at
    // the filter, which OSSEC-style log watching would never see.
    void observe_quiet(const SecurityEvent& event);

    void unblock(Ipv4 src, VTime now);

    void set_level_override(EventKind kind, int level);

    const Blacklist& blacklist() const { return blacklist_; }
    bool is_blacklisted(Ipv4 src) const { return blacklist_.count(src) > 0; }

    // Alerts at or above the log floor, in emission order.
    const std::vector<Alert>& alert_log() const { return log_; }
    const std::map<int, std::uint64_t>& level_counts() const { return level_counts_; }

    int log_floor() const { return log_floor_; }
    void set_log_floor(int floor) { log_floor_ = floor; }

    // True when every blacklist entry has a matching DROP rule and vice
    // versa; the harness asserts this after every command.
    bool coherent_with_chain() const;

    static std::string blacklist_tag(Ipv4 src);

private:
    int base_level(EventKind kind) const;
    int window_count(Ipv4 src, VTime now) const;

    RateRule rule_;
    pktfilter::Chain& chain_;
    notify::Sink& mail_;
    std::string admin_address_;
    int log_floor_ = kActionableFloor;

    struct SrcState {
        std::deque<VTime> events;  // timestamps within the window
        bool episode_active = false;
    };
    std::map<Ipv4, SrcState> windows_;
    Blacklist blacklist_;
    std::map<Ipv4, bool> seen_;
    std::vector<Alert> log_;
    std::map<int, std::uint64_t> level_counts_;
    std::map<EventKind, int> overrides_;
};

}  // namespace minipbx::sentinel

#endif
