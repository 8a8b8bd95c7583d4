#include "minipbx/vtime.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>

namespace minipbx {

namespace {

// Civil date from day count (days since 1970-01-01). Scenario runs rarely
// pass one virtual day, but journal timestamps should not lie if they do.
void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

std::string iso8601(VTime t) {
    if (t < 0) t = 0;
    std::int64_t ms = t % 1000;
    std::int64_t secs = t / 1000;
    std::int64_t days = secs / 86400;
    std::int64_t sod = secs % 86400;
    int y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", y,
                  mo, d, static_cast<long long>(sod / 3600),
                  static_cast<long long>((sod / 60) % 60),
                  static_cast<long long>(sod % 60), static_cast<long long>(ms));
    return buf;
}

VirtualClock::TimerId VirtualClock::schedule(VTime at, std::function<void()> fn) {
    assert(at >= now_ && "timers may not be scheduled in the past");
    auto t = std::make_unique<Timer>(Timer{at, next_id_++, std::move(fn)});
    TimerId id = t->id;
    heap_.push_back(std::move(t));
    std::push_heap(heap_.begin(), heap_.end(), Later{});
    return id;
}

void VirtualClock::cancel(TimerId id) {
    for (auto& t : heap_)
        if (t->id == id) t->cancelled = true;
}

void VirtualClock::prune() {
    while (!heap_.empty() && heap_.front()->cancelled) {
        std::pop_heap(heap_.begin(), heap_.end(), Later{});
        heap_.pop_back();
    }
}

bool VirtualClock::empty() const {
    for (const auto& t : heap_)
        if (!t->cancelled) return false;
    return true;
}

std::optional<VTime> VirtualClock::next_at() const {
    std::optional<VTime> best;
    for (const auto& t : heap_) {
        if (t->cancelled) continue;
        if (!best || t->at < *best) best = t->at;
    }
    return best;
}

bool VirtualClock::run_next() {
    prune();
    if (heap_.empty()) return false;
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    auto t = std::move(heap_.back());
    heap_.pop_back();
    assert(t->at >= now_);
    now_ = t->at;
    t->fn();
    return true;
}

void VirtualClock::run_until(VTime t) {
    for (;;) {
        prune();
        if (heap_.empty() || heap_.front()->at > t) break;
        run_next();
    }
    if (now_ < t) now_ = t;
}

}  // namespace minipbx
