#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <unordered_set>
#include <vector>

namespace andlantis {

/// Discrete-event virtual clock. Events fire in (time, insertion order), so
/// a given schedule always replays identically.
class VirtualClock {
public:
    using Callback = std::function<void()>;
    using EventId = std::uint64_t;

    double now() const noexcept { return now_; }

    /// Schedule at an absolute time; times in the past are clamped to now.
    EventId schedule_at(double at_s, Callback fn);
    EventId schedule_in(double delay_s, Callback fn) { return schedule_at(now_ + delay_s, std::move(fn)); }

    void cancel(EventId id);

    /// Fire the next event. Returns false when the queue is empty.
    bool step();

    /// Run until the queue drains.
    void run();

    /// Run events with time <= deadline, then advance now to the deadline.
    void run_until(double deadline_s);

    /// Run while the predicate holds and events remain.
    void run_while(const std::function<bool()> &keep_going);

    bool idle() const noexcept { return pending_ids_.empty(); }
    std::size_t pending() const noexcept { return pending_ids_.size(); }

private:
    struct Event {
        double at;
        EventId seq;
        Callback fn;
    };
    struct Later {
        bool operator()(const Event &a, const Event &b) const {
            if (a.at != b.at) {
                return a.at > b.at;
            }
            return a.seq > b.seq;
        }
    };

    bool pop_live(Event &out);
    void drop_cancelled_top();

    double now_ = 0.0;
    EventId next_seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::unordered_set<EventId> pending_ids_;
};

} // namespace andlantis
