#ifndef MINIPBX_VTIME_HPP
#define MINIPBX_VTIME_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace minipbx {

// Virtual time in milliseconds since the start of a run. All rate windows,
// timeouts and journal timestamps are expressed in it so runs replay
// byte-identically.
using VTime = std::int64_t;

inline constexpr VTime kMillisPerSecond = 1000;

// "1970-01-01T00:00:12.340Z" -- virtual epoch, not wall clock.
std::string iso8601(VTime t);

// Single-owner timer queue. Timers fire in timestamp order; ties break by
// insertion order so two runs of the same scenario schedule identically.
class VirtualClock {
public:
    using TimerId = std::uint64_t;

    VirtualClock() = default;
    VirtualClock(const VirtualClock&) = delete;
    VirtualClock& operator=(const VirtualClock&) = delete;

    VTime now() const { return now_; }

    TimerId schedule(VTime at, std::function<void()> fn);
    void cancel(TimerId id);

    bool empty() const;
    // Earliest pending timer timestamp, if any.
    std::optional<VTime> next_at() const;
    // Fires the earliest pending timer, advancing now() to its timestamp.
    // Returns false when nothing is pending.
    bool run_next();
    // Fires every timer due at or before t, then leaves now() == t.
    void run_until(VTime t);

private:
    struct Timer {
        VTime at;
        TimerId id;
        std::function<void()> fn;
        bool cancelled = false;
    };
    struct Later {
        bool operator()(const std::unique_ptr<Timer>& a,
                        const std::unique_ptr<Timer>& b) const {
            if (a->at != b->at) return a->at > b->at;
            return a->id > b->id;
        }
    };

    void prune();

    VTime now_ = 0;
    TimerId next_id_ = 1;
    std::vector<std::unique_ptr<Timer>> heap_;  // min-heap by (at, id)
};

}  // namespace minipbx

#endif
