#pragma once

#include <chrono>

#include "leosim/metrics.hpp"
#include "leosim/transport.hpp"

// One flow, one direction: a greedy sender at the source ground station, a
// receiver at the destination, and the netem pipeline between them. The
// whole run is a single deterministic event loop.

namespace leosim {

struct SimParams {
    double duration_s = 1000;
    double link_rate_bps = 1e8;
    int queue_capacity_pkts = 512;
    std::string cc_name = "cubic";
    double bbr_cwnd_gain = 3.0;
    double bin_s = 0.05;
    uint32_t mss = 1460;
    uint32_t header_bytes = 40;
    bool packet_trace = false;
    std::string packet_trace_path;
};

struct RunResult {
    std::vector<MetricSample> bins;
    std::vector<TraceEvent> events;
    ReorderStats reorder;
    std::vector<double> reorder_times;
    std::vector<double> spurious_times;
    std::vector<double> fast_recovery_times;
    std::vector<double> route_change_times;
    uint64_t injected = 0, delivered = 0, dropped = 0, in_flight_at_end = 0;
    uint64_t retx_total = 0, rto_count = 0;
    uint64_t delivered_in_order_bytes = 0;
    uint64_t acks_sent = 0, acks_delivered = 0;
    uint64_t dupacks_emitted = 0;
    uint64_t max_flight_excess = 0;
    double final_srtt_s = 0;
    double wall_seconds = 0;  // never written to output files
};

inline RunResult simulate(const RouteSchedule& sched, const SimParams& p) {
    const auto wall_start = std::chrono::steady_clock::now();

    EventQueue queue;
    Network net(&sched, NetemParams{p.link_rate_bps, p.queue_capacity_pkts, p.header_bytes},
                &queue);
    Receiver receiver;
    SenderConfig scfg;
    scfg.mss = p.mss;
    scfg.wire_header = p.header_bytes;
    Sender sender(make_congestion_controller(p.cc_name, p.mss, p.bbr_cwnd_gain), scfg);
    ReorderAccumulator reorder(p.mss);
    RunResult result;

    std::ofstream trace_file;
    if (p.packet_trace) {
        trace_file.open(p.packet_trace_path);
        if (!trace_file) throw std::runtime_error("cannot write " + p.packet_trace_path);
        trace_file << "time_s,flow,seq,kind,epoch,in_order\n";
    }

    net.on_deliver = [&](const DeliveryRecord& rec) {
        reorder.on_delivery(rec.seq, rec.payload_bytes, rec.arrival_time_s, rec.retransmitted);
        if (p.packet_trace) {
            char line[128];
            std::snprintf(line, sizeof line, "%.9f,0,%llu,%s,%u,%d\n", rec.arrival_time_s,
                          static_cast<unsigned long long>(rec.seq),
                          rec.retransmitted ? "rtx" : "data", rec.route_epoch,
                          rec.in_order ? 1 : 0);
            trace_file << line;
        }
        const AckInfo ack = receiver.on_data(rec.seq, rec.payload_bytes);
        net.send_ack(ack.cumulative, ack.frontier, rec.arrival_time_s);
    };
    net.on_ack_arrival = [&](uint64_t ack, uint64_t frontier, double t) {
        sender.on_ack(AckInfo{ack, frontier}, t);
    };
    net.on_drop = [&](const Packet& pkt, double t, int from, int to) {
        result.events.push_back(
            {t, "drop", "seq=" + std::to_string(pkt.seq) + " link=" + std::to_string(from) +
                            ">" + std::to_string(to)});
        if (p.packet_trace) {
            char line[128];
            std::snprintf(line, sizeof line, "%.9f,0,%llu,drop,%u,0\n", t,
                          static_cast<unsigned long long>(pkt.seq), pkt.route_epoch);
            trace_file << line;
        }
    };

    uint64_t retx_in_bin = 0;
    sender.emit_segment = [&](uint64_t seq, uint32_t payload, bool rtx, double t) {
        net.inject_data(seq, payload, rtx, t);
        if (rtx) {
            reorder.on_retransmit(seq, t);
            ++retx_in_bin;
        }
    };
    sender.schedule_pacing = [&](double t) { queue.push(t, EventKind::PacedSend); };
    sender.schedule_rto_check = [&](double t) { queue.push(t, EventKind::RtoTimer); };
    sender.trace = [&](double t, const char* kind, const std::string& detail) {
        result.events.push_back({t, kind, detail});
        if (detail == phase_name(TcpPhase::FastRecovery))
            result.fast_recovery_times.push_back(t);
    };

    for (size_t i = 1; i < sched.epochs.size(); ++i) {
        Packet marker;
        marker.route_epoch = static_cast<uint32_t>(i);
        queue.push(sched.epochs[i].start_s, EventKind::RouteChange, marker);
        result.route_change_times.push_back(sched.epochs[i].start_s);
    }

    double bin_start = 0;
    uint64_t bin_rcv_base = 0;
    const auto flush_bin = [&](double t) {
        const double width = t - bin_start;
        if (width <= 0) return;
        MetricSample s;
        s.time_s = bin_start;
        s.goodput_bps = static_cast<double>(receiver.rcv_next - bin_rcv_base) * 8.0 / width;
        s.srtt_s = sender.srtt_s;
        s.cwnd_bytes = sender.effective_cwnd();
        s.retransmissions_in_bin = retx_in_bin;
        result.bins.push_back(s);
        bin_start = t;
        bin_rcv_base = receiver.rcv_next;
        retx_in_bin = 0;
    };

    uint64_t tick_index = 1;
    queue.push(std::min(p.bin_s, p.duration_s), EventKind::MetricsTick);

    sender.start(0);
    queue.run_until(p.duration_s, [&](const Event& ev) {
        switch (ev.kind) {
        case EventKind::HopArrival:
        case EventKind::AckArrival:
            net.handle(ev);
            break;
        case EventKind::RtoTimer:
            sender.on_rto_timer(ev.t);
            break;
        case EventKind::PacedSend:
            sender.on_pacing_timer(ev.t);
            break;
        case EventKind::MetricsTick: {
            flush_bin(ev.t);
            ++tick_index;
            const double next = tick_index * p.bin_s;
            if (next <= p.duration_s + 1e-9) queue.push(next, EventKind::MetricsTick);
            break;
        }
        case EventKind::RouteChange: {
            const RouteEpoch& e = sched.epochs[ev.pkt.route_epoch];
            char detail[64];
            std::snprintf(detail, sizeof detail, "epoch=%u delay_ms=%.6f", ev.pkt.route_epoch,
                          e.route.total_propagation_s * 1e3);
            result.events.push_back({ev.t, "route-change", detail});
            break;
        }
        }
    });
    flush_bin(p.duration_s);

    result.reorder = reorder.stats();
    result.reorder_times = reorder.reorder_times();
    result.spurious_times = reorder.spurious_times();
    result.injected = net.injected;
    result.delivered = net.delivered;
    result.dropped = net.dropped;
    result.in_flight_at_end = net.in_flight_in_queue();
    result.retx_total = sender.retx_total;
    result.rto_count = sender.rto_count;
    result.delivered_in_order_bytes = receiver.delivered_in_order_bytes();
    result.acks_sent = net.acks_sent;
    result.acks_delivered = net.acks_delivered;
    result.dupacks_emitted = receiver.dupacks_emitted;
    result.max_flight_excess = sender.max_flight_excess;
    result.final_srtt_s = sender.srtt_s;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return result;
}

} // namespace leosim
