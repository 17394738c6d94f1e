#pragma once

#include <functional>
#include <map>

#include "leosim/congestion.hpp"

// Reliable in-order byte stream over the simulated network: greedy sender
// with pluggable congestion control, cumulative-ACK + DUPACK loss detection
// (NewReno partial-ACK recovery, no SACK), RTO with exponential backoff, and
// RFC 6298 smoothed-RTT estimation. One ACK per data packet, no delayed ACKs.

namespace leosim {

enum class TcpPhase : uint8_t { SlowStart, CongAvoid, FastRecovery, RtoRecovery };

inline const char* phase_name(TcpPhase p) {
    switch (p) {
    case TcpPhase::SlowStart: return "slow-start";
    case TcpPhase::CongAvoid: return "congestion-avoidance";
    case TcpPhase::FastRecovery: return "fast-recovery";
    case TcpPhase::RtoRecovery: return "rto-recovery";
    }
    return "?";
}

struct AckInfo {
    uint64_t cumulative = 0;  // next byte expected in order
    uint64_t frontier = 0;    // highest byte received (forward ack)
};

struct Receiver {
    uint64_t rcv_next = 0;
    uint64_t frontier = 0;  // max end of received data
    std::map<uint64_t, uint32_t> out_of_order;  // seq -> payload size
    uint64_t dupacks_emitted = 0;

    // Returns the ack to emit (exactly one per data packet). Besides the
    // cumulative value, the ack reports how far reception has advanced, the
    // way forward acknowledgments did in SACK-era stacks.
    AckInfo on_data(uint64_t seq, uint32_t size) {
        if (seq == rcv_next) {
            rcv_next += size;
            auto it = out_of_order.begin();
            while (it != out_of_order.end() && it->first <= rcv_next) {
                rcv_next = std::max(rcv_next, it->first + it->second);
                it = out_of_order.erase(it);
            }
        } else if (seq > rcv_next) {
            out_of_order.emplace(seq, size);
            ++dupacks_emitted;
        } else {
            ++dupacks_emitted;  // stale copy, below rcv_next
        }
        frontier = std::max(frontier, seq + size);
        return {rcv_next, frontier};
    }

    uint64_t delivered_in_order_bytes() const { return rcv_next; }
};

struct SenderConfig {
    uint32_t mss = 1460;
    uint32_t wire_header = 40;  // pacing works on wire size
    uint64_t init_cwnd_mss = 10;
    double rto_min_s = 0.2;
    double rto_initial_s = 1.0;
    double rto_max_s = 60.0;
    int dupack_threshold = 3;
    // segments released per ack event when unpaced, sized like one TSO
    // aggregate; a giant cumulative ack after a reordering episode bursts
    // up to this much into the path, which is what makes route changes
    // visible to loss-based senders
    int max_burst_segments = 44;
};

class Sender {
public:
    struct SegmentMeta {
        double send_time = 0;
        uint32_t size = 0;
        bool retransmitted = false;
        double delivered_at_send = 0;       // rate-sample snapshot
        double delivered_time_at_send = 0;
    };

    Sender(std::unique_ptr<CongestionController> cc, SenderConfig cfg)
        : cfg_(cfg), cc_(std::move(cc)), rto_s(cfg.rto_initial_s) {}

    // wiring, set by the owner before start()
    std::function<void(uint64_t seq, uint32_t payload, bool rtx, double t)> emit_segment;
    std::function<void(double t)> schedule_pacing;
    std::function<void(double t)> schedule_rto_check;
    std::function<void(double t, const char* kind, const std::string& detail)> trace;

    // ---- state, readable by tests and metrics ----
    uint64_t next_seq = 0;
    uint64_t highest_acked = 0;
    std::map<uint64_t, SegmentMeta> in_flight;
    int dupack_count = 0;
    TcpPhase phase = TcpPhase::SlowStart;
    double srtt_s = 0, rttvar_s = 0, rto_s;
    bool have_rtt = false;
    uint64_t recover_point = 0;
    bool ever_recovered = false;
    uint64_t highest_frontier = 0;  // forward-ack high water mark
    double delivered_bytes = 0, delivered_time = 0;
    uint64_t retx_total = 0, rto_count = 0, rtt_samples = 0;
    double rto_deadline = kNever;
    double rto_timer_event = kNever;  // earliest pending RtoTimer event
    double next_pace_time = 0;
    double pace_event_time = kNever;  // earliest pending PacedSend event
    uint64_t resend_next = 0;  // go-back-n cursor after a timeout
    uint64_t rto_pipe = 0;     // bytes believed in the network since the timeout
    bool first_partial_seen = false;
    // RFC 6937 proportional rate reduction: new data during fast recovery is
    // released at the reduction fraction of the delivery rate, so the
    // bottleneck drains instead of growing fresh holes mid-recovery
    double prr_delivered = 0, prr_out = 0;
    uint64_t recovery_flight0 = 0, recovery_target = 0;
    uint64_t max_flight_excess = 0;  // should stay 0: flight never exceeds cwnd

    CongestionController& cc() { return *cc_; }
    const CongestionController& cc() const { return *cc_; }
    uint64_t mss() const { return cfg_.mss; }

    uint64_t flight_bytes() const { return next_seq - highest_acked; }
    uint64_t effective_cwnd() const { return cc_->cwnd_bytes(); }

    void start(double now) { try_send(now); }

    // RFC 6298
    void update_rtt(double sample_s) {
        ++rtt_samples;
        if (!have_rtt) {
            srtt_s = sample_s;
            rttvar_s = sample_s / 2;
            have_rtt = true;
        } else {
            rttvar_s = 0.75 * rttvar_s + 0.25 * std::abs(srtt_s - sample_s);
            srtt_s = 0.875 * srtt_s + 0.125 * sample_s;
        }
        rto_s = std::clamp(srtt_s + 4 * rttvar_s, cfg_.rto_min_s, cfg_.rto_max_s);
    }

    void on_ack(uint64_t ack, double now) { on_ack(AckInfo{ack, ack}, now); }

    void on_ack(const AckInfo& info, double now) {
        highest_frontier = std::max(highest_frontier, info.frontier);
        if (info.cumulative > highest_acked) {
            handle_cumulative_ack(info.cumulative, now);
        } else if (info.cumulative == highest_acked && !in_flight.empty()) {
            handle_dupack(now);
        }
        // acks below highest_acked are stale (reordered on the return path)
        maybe_fast_retransmit(now);
        try_send(now);
    }

    void on_pacing_timer(double now) {
        pace_event_time = kNever;
        try_send(now);
    }

    void on_rto_timer(double now) {
        rto_timer_event = kNever;
        if (in_flight.empty() || rto_deadline == kNever) return;
        if (now < rto_deadline - 1e-12) {
            arm_timer_event(rto_deadline);
            return;
        }
        ++rto_count;
        if (trace) trace(now, "rto", "rto_s=" + std::to_string(rto_s));
        // after a timeout everything outstanding is presumed gone; the pipe
        // estimate restarts from zero and the window is resent go-back-n
        const uint64_t pipe_at_rto =
            phase == TcpPhase::RtoRecovery ? rto_pipe : flight_bytes();
        set_phase(TcpPhase::RtoRecovery, now);
        recover_point = next_seq;
        ever_recovered = true;
        dupack_count = 0;
        cc_->on_rto(pipe_at_rto, now);
        resend_next = highest_acked;
        rto_pipe = 0;
        retransmit(resend_next, now, "rto");
        if (auto it = in_flight.find(resend_next); it != in_flight.end()) {
            rto_pipe += it->second.size;
            resend_next += it->second.size;
        }
        rto_s = std::min(rto_s * 2, cfg_.rto_max_s);  // Karn backoff
        rto_deadline = now + rto_s;
        arm_timer_event(rto_deadline);
        try_send(now);
    }

    void try_send(double now) {
        if (!emit_segment) return;
        int burst = cfg_.max_burst_segments;
        if (phase == TcpPhase::RtoRecovery) {
            while (resend_next < recover_point) {
                if (rto_pipe + cfg_.mss > effective_cwnd()) return;
                if (burst-- <= 0) return;
                if (!pacing_gate(now)) return;
                auto it = in_flight.find(resend_next);
                if (it == in_flight.end()) break;  // cursor desynced by an ack
                retransmit(resend_next, now, "rto-resend");
                rto_pipe += it->second.size;
                resend_next += it->second.size;
            }
        }
        while (true) {
            const uint64_t cwnd = effective_cwnd();
            const uint64_t pipe =
                phase == TcpPhase::RtoRecovery ? rto_pipe : flight_bytes();
            if (pipe + cfg_.mss > cwnd) break;
            if (burst-- <= 0) break;
            if (phase == TcpPhase::FastRecovery && cc_->reacts_to_loss()) {
                const double budget =
                    prr_delivered * recovery_target / recovery_flight0 - prr_out;
                if (budget < cfg_.mss) break;
            }
            if (!pacing_gate(now)) break;
            if (phase == TcpPhase::FastRecovery) prr_out += cfg_.mss;
            if (phase == TcpPhase::RtoRecovery) rto_pipe += cfg_.mss;
            // the guard above keeps every new-data send within the window;
            // a nonzero excess means some code path bypassed it
            if (phase != TcpPhase::RtoRecovery && flight_bytes() + cfg_.mss > cwnd)
                max_flight_excess =
                    std::max(max_flight_excess, flight_bytes() + cfg_.mss - cwnd);
            send_new_segment(now);
        }
    }

    static constexpr double kNever = std::numeric_limits<double>::max();

private:
    // true when a segment may leave now; otherwise schedules the pace timer
    bool pacing_gate(double now) {
        const double pacing = cc_->pacing_rate_bps();
        if (pacing <= 0) return true;
        if (now < next_pace_time - 1e-12) {
            if (schedule_pacing && pace_event_time > next_pace_time) {
                pace_event_time = next_pace_time;
                schedule_pacing(next_pace_time);
            }
            return false;
        }
        next_pace_time =
            std::max(now, next_pace_time) + (cfg_.mss + cfg_.wire_header) * 8.0 / pacing;
        return true;
    }

    void send_new_segment(double now) {
        SegmentMeta meta{now, cfg_.mss, false, delivered_bytes, delivered_time};
        in_flight.emplace(next_seq, meta);
        const uint64_t seq = next_seq;
        next_seq += cfg_.mss;
        if (rto_deadline == kNever) {
            rto_deadline = now + rto_s;
            arm_timer_event(rto_deadline);
        }
        emit_segment(seq, cfg_.mss, false, now);
    }

    void retransmit(uint64_t seq, double now, const char* reason) {
        auto it = in_flight.find(seq);
        if (it == in_flight.end()) return;
        it->second.retransmitted = true;
        ++retx_total;
        if (trace)
            trace(now, "retransmission",
                  "seq=" + std::to_string(seq) + " reason=" + reason);
        emit_segment(seq, it->second.size, true, now);
    }

    void handle_cumulative_ack(uint64_t ack, double now) {
        // The segment whose arrival triggered this advance sits at the old
        // snd_una. RTT comes from it alone: sampling higher covered segments
        // would measure receiver buffering after reordering, not the path.
        // Karn: no sample when the trigger segment was ever retransmitted.
        // The delivery-rate sample instead uses the newest covered segment,
        // so a cumulative jump after a reordering episode yields the same
        // inflated bandwidth sample a real rate estimator produces.
        double rtt_sample = -1;
        double rate_sample = -1;
        auto it = in_flight.begin();
        const bool clean_trigger =
            it != in_flight.end() && !it->second.retransmitted;
        if (clean_trigger) rtt_sample = now - it->second.send_time;
        SegmentMeta newest{};
        bool have_newest = false;
        while (it != in_flight.end() && it->first < ack) {
            if (!it->second.retransmitted) {
                newest = it->second;
                have_newest = true;
            }
            it = in_flight.erase(it);
        }
        const uint64_t newly = ack - highest_acked;
        if (clean_trigger && have_newest && now > newest.delivered_time_at_send)
            rate_sample = (delivered_bytes + newly - newest.delivered_at_send) * 8.0 /
                          (now - newest.delivered_time_at_send);
        highest_acked = ack;
        delivered_bytes += static_cast<double>(newly);
        delivered_time = now;
        if (rtt_sample >= 0) update_rtt(rtt_sample);
        dupack_count = 0;

        AckContext ctx;
        ctx.now = now;
        ctx.newly_acked = newly;
        ctx.rtt_sample_s = rtt_sample;
        ctx.delivery_rate_bps = rate_sample;
        ctx.cum_ack = ack;
        ctx.snd_nxt = next_seq;
        ctx.flight_bytes = flight_bytes();
        ctx.srtt_s = srtt_s;
        ctx.in_loss_recovery = phase == TcpPhase::FastRecovery;
        cc_->on_ack(ctx);

        bool restart_timer = true;
        if (phase == TcpPhase::FastRecovery) {
            if (ack >= recover_point) {
                cc_->on_recovery_exit(flight_bytes(), now);
                set_phase(steady_phase(), now);
            } else {
                prr_delivered += static_cast<double>(newly);
                retransmit(highest_acked, now, "partial-ack");  // next hole
                // Loss-based controllers run the RFC 6582 careful variant:
                // every partial ack restarts the timer and the crawl repairs
                // holes one per rtt. BBR has no window investment in that
                // crawl, so it takes the impatient variant and bails to the
                // timeout path, whose go-back-n sweeps the window at line
                // rate under the conservative gain.
                if (!cc_->reacts_to_loss()) {
                    if (first_partial_seen) restart_timer = false;
                    first_partial_seen = true;
                }
            }
        } else if (phase == TcpPhase::RtoRecovery) {
            resend_next = std::max(resend_next, ack);
            rto_pipe -= std::min(rto_pipe, newly);
            if (ack >= recover_point) {
                cc_->on_recovery_exit(flight_bytes(), now);
                set_phase(steady_phase(), now);
            }
        } else {
            set_phase(steady_phase(), now);
        }
        // RFC 6298 5.2/5.3: restart on acks of new data, stop when empty
        if (in_flight.empty()) {
            rto_deadline = kNever;
        } else if (restart_timer) {
            rto_deadline = now + rto_s;
            arm_timer_event(rto_deadline);
        }
    }

    void handle_dupack(double now) {
        ++dupack_count;
        if (phase == TcpPhase::FastRecovery) {
            prr_delivered += cfg_.mss;  // a dupack signals one delivery
        } else if (phase == TcpPhase::RtoRecovery) {
            rto_pipe -= std::min<uint64_t>(rto_pipe, cfg_.mss);  // a delivery left the pipe
        }
    }

    // Fast retransmit fires on the classic threshold of consecutive
    // duplicate acks, or when the forward ack shows reception running more
    // than the same threshold past the hole. The second form is what
    // detects reordering when in-order and out-of-order arrivals interleave
    // and keep resetting the consecutive counter.
    void maybe_fast_retransmit(double now) {
        if (phase == TcpPhase::FastRecovery || phase == TcpPhase::RtoRecovery) return;
        if (in_flight.empty()) return;
        const bool classic = dupack_count >= cfg_.dupack_threshold;
        const bool forward =
            highest_frontier >
            highest_acked + static_cast<uint64_t>(cfg_.dupack_threshold) * cfg_.mss;
        if (!classic && !forward) return;
        // RFC 6582 re-entry guard against dupack storms from spurious rtx
        if (ever_recovered && highest_acked <= recover_point) return;
        recover_point = next_seq;
        ever_recovered = true;
        recovery_flight0 = std::max<uint64_t>(flight_bytes(), 1);
        prr_delivered = 0;
        prr_out = 0;
        set_phase(TcpPhase::FastRecovery, now);
        cc_->on_dupack_loss(flight_bytes(), now);
        recovery_target = cc_->recovery_target_bytes();
        retransmit(highest_acked, now, "fast-retransmit");
    }

    TcpPhase steady_phase() const {
        return cc_->in_slow_start() ? TcpPhase::SlowStart : TcpPhase::CongAvoid;
    }
    void set_phase(TcpPhase p, double now) {
        if (p == phase) return;
        phase = p;
        if (trace) trace(now, "phase-change", phase_name(p));
    }
    void arm_timer_event(double deadline) {
        if (!schedule_rto_check) return;
        if (rto_timer_event <= deadline) return;  // a pending check covers it
        rto_timer_event = deadline;
        schedule_rto_check(deadline);
    }

    SenderConfig cfg_;
    std::unique_ptr<CongestionController> cc_;
};

} // namespace leosim
