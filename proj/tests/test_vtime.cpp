#include <doctest.h>

#include <vector>

#include "minipbx/vtime.hpp"

using namespace minipbx;

TEST_SUITE_BEGIN("vtime");

TEST_CASE("iso8601 renders the virtual epoch") {
    CHECK(iso8601(0) == "1970-01-01T00:00:00.000Z");
    CHECK(iso8601(12340) == "1970-01-01T00:00:12.340Z");
    CHECK(iso8601(3661 * 1000 + 7) == "1970-01-01T01:01:01.007Z");
    CHECK(iso8601(86400 * 1000) == "1970-01-02T00:00:00.000Z");
}

TEST_CASE("timers fire in timestamp order with insertion tie-break") {
    VirtualClock clock;
    std::vector<int> fired;
    clock.schedule(20, [&] { fired.push_back(2); });
    clock.schedule(10, [&] { fired.push_back(1); });
    clock.schedule(20, [&] { fired.push_back(3); });  // same time, inserted later
    while (clock.run_next()) {
    }
    CHECK(fired == std::vector<int>{1, 2, 3});
    CHECK(clock.now() == 20);
}

TEST_CASE("cancelled timers never fire") {
    VirtualClock clock;
    int count = 0;
    auto id = clock.schedule(5, [&] { ++count; });
    clock.schedule(6, [&] { ++count; });
    clock.cancel(id);
    clock.run_until(10);
    CHECK(count == 1);
    CHECK(clock.now() == 10);
}

TEST_CASE("run_until fires everything due and advances now") {
    VirtualClock clock;
    int count = 0;
    clock.schedule(5, [&] { ++count; });
    clock.schedule(15, [&] { ++count; });
    clock.run_until(10);
    CHECK(count == 1);
    CHECK(clock.now() == 10);
    CHECK(clock.next_at() == VTime(15));
}

TEST_CASE("timers scheduled while running keep ordering") {
    VirtualClock clock;
    std::vector<int> fired;
    clock.schedule(10, [&] {
        fired.push_back(1);
        clock.schedule(12, [&] { fired.push_back(2); });
    });
    clock.schedule(14, [&] { fired.push_back(3); });
    while (clock.run_next()) {
    }
    CHECK(fired == std::vector<int>{1, 2, 3});
}

TEST_SUITE_END();
