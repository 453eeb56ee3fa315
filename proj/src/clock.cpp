#include "andlantis/clock.hpp"

#include <algorithm>

namespace andlantis {

VirtualClock::EventId VirtualClock::schedule_at(double at_s, Callback fn) {
    const EventId id = next_seq_++;
    queue_.push(Event{std::max(at_s, now_), id, std::move(fn)});
    pending_ids_.insert(id);
    return id;
}

void VirtualClock::cancel(EventId id) { pending_ids_.erase(id); }

void VirtualClock::drop_cancelled_top() {
    while (!queue_.empty() && !pending_ids_.contains(queue_.top().seq)) {
        queue_.pop();
    }
}

bool VirtualClock::pop_live(Event &out) {
    drop_cancelled_top();
    if (queue_.empty()) {
        return false;
    }
    // priority_queue::top is const; the callback is moved out right before pop.
    out = std::move(const_cast<Event &>(queue_.top()));
    queue_.pop();
    pending_ids_.erase(out.seq);
    return true;
}

bool VirtualClock::step() {
    Event ev;
    if (!pop_live(ev)) {
        return false;
    }
    now_ = ev.at;
    ev.fn();
    return true;
}

void VirtualClock::run() {
    while (step()) {
    }
}

void VirtualClock::run_until(double deadline_s) {
    for (;;) {
        drop_cancelled_top();
        if (queue_.empty() || queue_.top().at > deadline_s) {
            break;
        }
        step();
    }
    now_ = std::max(now_, deadline_s);
}

void VirtualClock::run_while(const std::function<bool()> &keep_going) {
    while (keep_going() && step()) {
    }
}

} // namespace andlantis
