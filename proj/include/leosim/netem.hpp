#pragma once

#include <deque>
#include <functional>
#include <unordered_map>

#include "leosim/event_queue.hpp"
#include "leosim/topology.hpp"

// Per-hop packet pipeline over a route schedule. ISL hops serialize into a
// drop-tail FIFO and then propagate; ground-station hops carry propagation
// delay only. Data packets are pinned to the route epoch active when they
// were injected. ACKs traverse the route current at emission time with
// propagation delay only.

namespace leosim {

struct NetemParams {
    double link_rate_bps = 1e8;
    int queue_capacity_pkts = 512;
    uint32_t header_bytes = 40;  // wire size = payload + header
};

struct LinkQueue {
    double busy_until_s = 0;
    std::deque<double> departures;  // pending serialization-completion times
    uint64_t drops = 0;

    int occupancy_at(double t) {
        while (!departures.empty() && departures.front() <= t) departures.pop_front();
        return static_cast<int>(departures.size());
    }
};

struct DeliveryRecord {
    uint64_t seq = 0;
    uint32_t payload_bytes = 0;
    double arrival_time_s = 0;
    bool in_order = false;  // seq equals the arrival frontier (max delivered end)
    uint32_t route_epoch = 0;
    bool retransmitted = false;
};

class Network {
public:
    Network(const RouteSchedule* sched, NetemParams params, EventQueue* queue)
        : sched_(sched), params_(params), queue_(queue) {}

    std::function<void(const DeliveryRecord&)> on_deliver;
    std::function<void(uint64_t ack_seq, uint64_t ack_frontier, double t)> on_ack_arrival;
    std::function<void(const Packet&, double t, int from, int to)> on_drop;

    // Pins the packet to the epoch active at t and starts it at the first
    // route node. Zero-hop routes deliver at t.
    void inject_data(uint64_t seq, uint32_t payload_bytes, bool retransmitted, double t) {
        Packet pkt;
        pkt.seq = seq;
        pkt.wire_bytes = payload_bytes + params_.header_bytes;
        pkt.inject_time_s = t;
        pkt.route_epoch = static_cast<uint32_t>(sched_->epoch_index_at(t));
        pkt.hop = 0;
        pkt.kind = PacketKind::Data;
        pkt.retransmitted = retransmitted;
        ++injected;
        queue_->push(t, EventKind::HopArrival, pkt);
    }

    void send_ack(uint64_t ack_seq, uint64_t ack_frontier, double t) {
        Packet pkt;
        pkt.seq = ack_seq;
        pkt.ack_frontier = ack_frontier;
        pkt.wire_bytes = params_.header_bytes;
        pkt.inject_time_s = t;
        pkt.kind = PacketKind::Ack;
        ++acks_sent;
        queue_->push(t + sched_->route_at(t).total_propagation_s, EventKind::AckArrival, pkt);
    }

    void handle(const Event& ev) {
        if (ev.kind == EventKind::AckArrival) {
            ++acks_delivered;
            if (on_ack_arrival) on_ack_arrival(ev.pkt.seq, ev.pkt.ack_frontier, ev.t);
            return;
        }
        const Packet& pkt = ev.pkt;
        const Route& route = sched_->epochs[pkt.route_epoch].route;
        const int last = static_cast<int>(route.nodes.size()) - 1;
        if (pkt.hop >= last) {
            deliver(pkt, ev.t);
            return;
        }
        const double dist_km = route.hop_km[pkt.hop];
        const bool gs_hop = pkt.hop == 0 || pkt.hop + 1 == last;
        Packet next = pkt;
        next.hop = pkt.hop + 1;
        if (gs_hop) {
            queue_->push(ev.t + dist_km / kLightSpeedKmS, EventKind::HopArrival, next);
            return;
        }
        LinkQueue& link = link_between(route.nodes[pkt.hop], route.nodes[pkt.hop + 1]);
        if (link.occupancy_at(ev.t) >= params_.queue_capacity_pkts) {
            ++dropped;
            ++link.drops;
            if (on_drop) on_drop(pkt, ev.t, route.nodes[pkt.hop], route.nodes[pkt.hop + 1]);
            return;
        }
        const double departure =
            std::max(ev.t, link.busy_until_s) + pkt.wire_bytes * 8.0 / params_.link_rate_bps;
        link.busy_until_s = departure;
        link.departures.push_back(departure);
        queue_->push(departure + dist_km / kLightSpeedKmS, EventKind::HopArrival, next);
    }

    // Data packets still inside the pipeline (for conservation checks).
    uint64_t in_flight_in_queue() const {
        uint64_t n = 0;
        for (const Event& ev : queue_->pending())
            if (ev.kind == EventKind::HopArrival && ev.pkt.kind == PacketKind::Data) ++n;
        return n;
    }

    uint64_t injected = 0, delivered = 0, dropped = 0;
    uint64_t acks_sent = 0, acks_delivered = 0;
    uint64_t arrival_frontier_bytes = 0;  // max end of delivered data

private:
    void deliver(const Packet& pkt, double t) {
        ++delivered;
        const uint32_t payload = pkt.wire_bytes - params_.header_bytes;
        DeliveryRecord rec;
        rec.seq = pkt.seq;
        rec.payload_bytes = payload;
        rec.arrival_time_s = t;
        rec.in_order = pkt.seq == arrival_frontier_bytes;
        rec.route_epoch = pkt.route_epoch;
        rec.retransmitted = pkt.retransmitted;
        arrival_frontier_bytes = std::max(arrival_frontier_bytes, pkt.seq + payload);
        if (on_deliver) on_deliver(rec);
    }

    LinkQueue& link_between(int from, int to) {
        const uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(from)) << 32) |
                             static_cast<uint32_t>(to);
        return links_[key];
    }

    const RouteSchedule* sched_;
    NetemParams params_;
    EventQueue* queue_;
    std::unordered_map<uint64_t, LinkQueue> links_;
};

} // namespace leosim
