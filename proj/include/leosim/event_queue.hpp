#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace leosim {

enum class EventKind : uint8_t {
    HopArrival,   // packet arrived at route node `hop`
    AckArrival,   // ack reached the sender
    RtoTimer,
    PacedSend,
    MetricsTick,
    RouteChange,
};

enum class PacketKind : uint8_t { Data, Ack };

struct Packet {
    uint64_t seq = 0;           // byte offset (data) or cumulative ack value
    uint64_t ack_frontier = 0;  // acks: highest byte received (forward ack)
    uint32_t wire_bytes = 0;
    uint32_t flow = 0;
    double inject_time_s = 0;
    uint32_t route_epoch = 0;  // pinned at injection, never migrates
    uint16_t hop = 0;          // index into the route's node list
    PacketKind kind = PacketKind::Data;
    bool retransmitted = false;
};

struct Event {
    double t = 0;
    uint64_t id = 0;  // insertion counter, breaks time ties deterministically
    EventKind kind = EventKind::HopArrival;
    Packet pkt;
};

// Min-heap on (time, insertion id). The backing vector stays inspectable so
// diagnostics can count what is still in flight at the horizon.
class EventQueue {
public:
    void push(double t, EventKind kind, const Packet& pkt = {}) {
        heap_.push_back(Event{t, next_id_++, kind, pkt});
        std::push_heap(heap_.begin(), heap_.end(), later);
    }
    bool empty() const { return heap_.empty(); }
    size_t size() const { return heap_.size(); }
    const Event& top() const { return heap_.front(); }
    Event pop() {
        std::pop_heap(heap_.begin(), heap_.end(), later);
        Event ev = heap_.back();
        heap_.pop_back();
        return ev;
    }
    double now() const { return now_; }
    const std::vector<Event>& pending() const { return heap_; }

    // Processes every event with time <= horizon in (time, id) order, then
    // advances the clock to the horizon. Events beyond it stay queued.
    template <typename Dispatch>
    void run_until(double horizon, Dispatch&& dispatch) {
        while (!heap_.empty() && heap_.front().t <= horizon) {
            Event ev = pop();
            now_ = ev.t;
            dispatch(ev);
        }
        now_ = horizon;
    }

private:
    static bool later(const Event& a, const Event& b) {
        if (a.t != b.t) return a.t > b.t;
        return a.id > b.id;
    }
    std::vector<Event> heap_;
    uint64_t next_id_ = 0;
    double now_ = 0;
};

} // namespace leosim
