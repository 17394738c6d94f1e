#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

namespace leosim {

struct AckContext {
    double now = 0;
    uint64_t newly_acked = 0;       // bytes cleared by this cumulative ack
    double rtt_sample_s = -1;       // <0: none (Karn)
    double delivery_rate_bps = -1;  // <0: none
    uint64_t cum_ack = 0;
    uint64_t snd_nxt = 0;
    uint64_t flight_bytes = 0;  // after the ack was applied
    double srtt_s = 0;
    bool in_loss_recovery = false;  // loss-based controllers freeze growth
};

class CongestionController {
public:
    virtual ~CongestionController() = default;
    virtual void on_ack(const AckContext& ctx) = 0;
    virtual void on_dupack_loss(uint64_t flight_bytes, double now) = 0;
    virtual void on_rto(uint64_t flight_bytes, double now) = 0;
    virtual void on_recovery_exit(uint64_t flight_bytes, double now) {}
    virtual uint64_t cwnd_bytes() const = 0;
    virtual double pacing_rate_bps() const { return 0; }  // 0: unpaced
    virtual bool in_slow_start() const = 0;
    virtual bool reacts_to_loss() const { return true; }
    // post-loss window target, used to proportion sending during recovery
    virtual uint64_t recovery_target_bytes() const { return cwnd_bytes(); }
    virtual const char* name() const = 0;
};

// Classic AIMD with NewReno-style halving. Congestion avoidance uses byte
// counting: +1 MSS once a full window of bytes has been acknowledged.
class RenoController : public CongestionController {
public:
    // A finite initial ssthresh bounds the first slow-start overshoot; without
    // SACK a several-hundred-hole burst takes one RTT per hole to repair.
    static constexpr uint64_t kInitSsthreshMss = 100;

    explicit RenoController(uint32_t mss, uint64_t init_cwnd_mss = 10,
                            uint64_t init_ssthresh_mss = kInitSsthreshMss)
        : mss_(mss), cwnd_(init_cwnd_mss * mss), ssthresh_(init_ssthresh_mss * mss) {}

    void on_ack(const AckContext& ctx) override {
        if (ctx.in_loss_recovery) return;
        if (cwnd_ < ssthresh_) {
            cwnd_ += std::min<uint64_t>(ctx.newly_acked, mss_);
            return;
        }
        acked_accum_ += ctx.newly_acked;
        while (acked_accum_ >= cwnd_) {
            acked_accum_ -= cwnd_;
            cwnd_ += mss_;
        }
    }
    void on_dupack_loss(uint64_t flight_bytes, double) override {
        ssthresh_ = std::max<uint64_t>(flight_bytes / 2, 2 * mss_);
        cwnd_ = ssthresh_ + 3 * mss_;  // fast-recovery inflation
        acked_accum_ = 0;
    }
    // deflate toward ssthresh; moderating to the real flight lets slow start
    // refill the pipe in bounded steps instead of one window-sized burst
    void on_recovery_exit(uint64_t flight_bytes, double) override {
        cwnd_ = std::min(ssthresh_, std::max<uint64_t>(flight_bytes, mss_));
    }
    void on_rto(uint64_t flight_bytes, double) override {
        ssthresh_ = std::max<uint64_t>(flight_bytes / 2, 2 * mss_);
        cwnd_ = mss_;
        acked_accum_ = 0;
    }
    uint64_t cwnd_bytes() const override { return cwnd_; }
    bool in_slow_start() const override { return cwnd_ < ssthresh_; }
    uint64_t recovery_target_bytes() const override { return ssthresh_; }
    const char* name() const override { return "reno"; }

    uint64_t ssthresh_bytes() const { return ssthresh_; }

private:
    uint64_t mss_;
    uint64_t cwnd_;
    uint64_t ssthresh_;
    uint64_t acked_accum_ = 0;
};

// Cubic growth W(t) = C*(t-K)^3 + W_max with the standard constants and the
// TCP-friendly lower bound. Window arithmetic is in segments.
class CubicController : public CongestionController {
public:
    static constexpr double kC = 0.4;     // segments / s^3
    static constexpr double kBeta = 0.7;  // multiplicative decrease

    explicit CubicController(uint32_t mss, uint64_t init_cwnd_mss = 10,
                             uint64_t init_ssthresh_mss = RenoController::kInitSsthreshMss)
        : mss_(mss),
          cwnd_(static_cast<double>(init_cwnd_mss) * mss),
          ssthresh_(init_ssthresh_mss * mss) {}

    double cubic_w_segments(double t_since_epoch) const {
        const double d = t_since_epoch - k_;
        return kC * d * d * d + w_max_seg_;
    }
    double window_segments(double t_since_epoch, double srtt_s) const {
        double w = cubic_w_segments(t_since_epoch);
        if (srtt_s > 0) {
            const double alpha = 3.0 * (1.0 - kBeta) / (1.0 + kBeta);
            const double w_est = w_max_seg_ * kBeta + alpha * t_since_epoch / srtt_s;
            w = std::max(w, w_est);
        }
        return w;
    }

    void on_ack(const AckContext& ctx) override {
        if (ctx.in_loss_recovery) return;
        if (cwnd_ < ssthresh_) {
            cwnd_ += std::min<uint64_t>(ctx.newly_acked, mss_);
            return;
        }
        if (epoch_start_ < 0) start_epoch(ctx.now);
        const double w = window_segments(ctx.now - epoch_start_, ctx.srtt_s);
        cwnd_ = std::max(w * mss_, static_cast<double>(mss_));
    }
    void on_dupack_loss(uint64_t, double) override {
        w_max_seg_ = cwnd_ / mss_;
        cwnd_ = std::max(kBeta * cwnd_, static_cast<double>(mss_));
        ssthresh_ = static_cast<uint64_t>(cwnd_);
        // the epoch re-anchors when congestion avoidance resumes, so a slow
        // hole-filling recovery does not silently consume the concave phase
        epoch_start_ = -1;
        k_ = std::cbrt(w_max_seg_ * (1.0 - kBeta) / kC);
    }
    void on_rto(uint64_t flight_bytes, double) override {
        w_max_seg_ = cwnd_ / mss_;
        ssthresh_ = std::max<uint64_t>(flight_bytes / 2, 2 * mss_);
        cwnd_ = mss_;
        epoch_start_ = -1;  // re-anchored when congestion avoidance resumes
    }
    void on_recovery_exit(uint64_t flight_bytes, double) override {
        cwnd_ = std::min(cwnd_, std::max<double>(flight_bytes, mss_));
    }
    uint64_t cwnd_bytes() const override { return static_cast<uint64_t>(cwnd_); }
    bool in_slow_start() const override { return cwnd_ < static_cast<double>(ssthresh_); }
    uint64_t recovery_target_bytes() const override { return ssthresh_; }
    const char* name() const override { return "cubic"; }

    double w_max_segments() const { return w_max_seg_; }
    double k_seconds() const { return k_; }

private:
    void start_epoch(double now) {
        epoch_start_ = now;
        const double cur_seg = cwnd_ / mss_;
        if (w_max_seg_ > cur_seg) {
            k_ = std::cbrt((w_max_seg_ - cur_seg) / kC);
        } else {
            w_max_seg_ = cur_seg;
            k_ = 0;
        }
    }

    uint32_t mss_;
    double cwnd_;  // bytes, fractional growth
    uint64_t ssthresh_;
    double w_max_seg_ = 0;
    double k_ = 0;
    double epoch_start_ = -1;
};

// Model-based controller: windowed max filter over the delivery rate and
// windowed min filter over the RTT drive pacing and the window. The window
// gain is 3 by default. Losses do not shrink the window; the RTO floor is
// 4 MSS.
class BbrController : public CongestionController {
public:
    static constexpr double kHighGain = 2.885390081777927;  // 2/ln 2
    static constexpr double kBwWindowRounds = 10;
    static constexpr double kMinRttWindowS = 10.0;
    static constexpr double kProbeRttDurationS = 0.2;

    explicit BbrController(uint32_t mss, double cwnd_gain = 3.0, uint64_t init_cwnd_mss = 10)
        : mss_(mss), cwnd_gain_(cwnd_gain), init_cwnd_(init_cwnd_mss * mss) {}

    void on_ack(const AckContext& ctx) override {
        bool round_start = false;
        if (ctx.cum_ack >= next_round_seq_) {
            ++round_count_;
            next_round_seq_ = ctx.snd_nxt;
            round_start = true;
        }
        if (ctx.delivery_rate_bps > 0) push_bw_sample(ctx.delivery_rate_bps);
        const bool min_rtt_expired =
            min_rtt_stamp_ >= 0 && ctx.now - min_rtt_stamp_ > kMinRttWindowS;
        if (ctx.rtt_sample_s > 0 && (ctx.rtt_sample_s <= min_rtt_s_ || min_rtt_expired)) {
            min_rtt_s_ = ctx.rtt_sample_s;
            min_rtt_stamp_ = ctx.now;
        }
        switch (mode_) {
        case Mode::Startup:
            pacing_gain_ = kHighGain;
            if (round_start) check_full_pipe();
            if (mode_ == Mode::Drain) pacing_gain_ = 1.0 / kHighGain;
            break;
        case Mode::Drain:
            pacing_gain_ = 1.0 / kHighGain;
            if (ctx.flight_bytes <= bdp_bytes(1.0)) enter_probe_bw(ctx.now);
            break;
        case Mode::ProbeBw:
            if (min_rtt_s_ < kInf && ctx.now - cycle_stamp_ > min_rtt_s_) {
                cycle_index_ = (cycle_index_ + 1) % 8;
                cycle_stamp_ = ctx.now;
            }
            pacing_gain_ = kGainCycle[cycle_index_];
            break;
        case Mode::ProbeRtt:
            pacing_gain_ = 1.0;
            if (ctx.now >= probe_rtt_done_) {
                min_rtt_stamp_ = ctx.now;
                if (filled_pipe_) enter_probe_bw(ctx.now);
                else mode_ = Mode::Startup;
            }
            break;
        }
        if (mode_ != Mode::ProbeRtt && min_rtt_s_ < kInf && min_rtt_expired) {
            mode_ = Mode::ProbeRtt;
            probe_rtt_done_ = ctx.now + kProbeRttDurationS;
        }
    }
    void on_dupack_loss(uint64_t, double) override {}
    void on_rto(uint64_t flight_bytes, double) override {
        // packet conservation at the inflight level where the timeout hit;
        // the filters are retained and the full gain returns after recovery
        conservative_ = true;
        conserve_cwnd_ = std::max<uint64_t>(flight_bytes, 4 * mss_);
    }
    void on_recovery_exit(uint64_t, double) override { conservative_ = false; }
    uint64_t cwnd_bytes() const override {
        if (mode_ == Mode::ProbeRtt) return 4 * static_cast<uint64_t>(mss_);
        if (conservative_) return conserve_cwnd_;
        const double bw = max_bw_bps();
        if (bw <= 0 || min_rtt_s_ >= kInf) return init_cwnd_;
        const double bdp = cwnd_gain_ * bw / 8.0 * min_rtt_s_;
        return std::max<uint64_t>(static_cast<uint64_t>(bdp), 4 * static_cast<uint64_t>(mss_));
    }
    double pacing_rate_bps() const override {
        const double bw = max_bw_bps();
        if (bw <= 0) return 0;
        return conservative_ ? bw : pacing_gain_ * bw;
    }
    bool in_slow_start() const override { return mode_ == Mode::Startup; }
    bool reacts_to_loss() const override { return false; }
    const char* name() const override { return "bbr"; }

    double max_bw_bps() const { return bw_filter_.empty() ? 0 : bw_filter_.front().bps; }
    double min_rtt_seconds() const { return min_rtt_s_; }
    static constexpr double gain_cycle_mean() {
        double s = 0;
        for (double g : kGainCycle) s += g;
        return s / 8.0;
    }
    // test hook: pin the filters to known contents
    void set_filters(double bw_bps, double min_rtt_s, double now = 0) {
        bw_filter_.clear();
        bw_filter_.push_back({round_count_, bw_bps});
        min_rtt_s_ = min_rtt_s;
        min_rtt_stamp_ = now;
    }

private:
    enum class Mode { Startup, Drain, ProbeBw, ProbeRtt };
    struct BwSample {
        uint64_t round;
        double bps;
    };
    static constexpr double kInf = std::numeric_limits<double>::infinity();
    static constexpr double kGainCycle[8] = {1.25, 0.75, 1, 1, 1, 1, 1, 1};

    double bdp_bytes(double gain) const {
        const double bw = max_bw_bps();
        if (bw <= 0 || min_rtt_s_ >= kInf) return init_cwnd_;
        return gain * bw / 8.0 * min_rtt_s_;
    }
    void push_bw_sample(double bps) {
        while (!bw_filter_.empty() &&
               bw_filter_.front().round + kBwWindowRounds < round_count_)
            bw_filter_.pop_front();
        while (!bw_filter_.empty() && bw_filter_.back().bps <= bps) bw_filter_.pop_back();
        bw_filter_.push_back({round_count_, bps});
    }
    void check_full_pipe() {
        if (filled_pipe_) return;
        const double bw = max_bw_bps();
        if (bw >= full_bw_ * 1.25) {
            full_bw_ = bw;
            full_bw_count_ = 0;
            return;
        }
        if (++full_bw_count_ >= 3) {
            filled_pipe_ = true;
            mode_ = Mode::Drain;
        }
    }
    void enter_probe_bw(double now) {
        mode_ = Mode::ProbeBw;
        cycle_index_ = 2;  // deterministic start inside the flat part of the cycle
        cycle_stamp_ = now;
        pacing_gain_ = kGainCycle[cycle_index_];
    }

    uint32_t mss_;
    double cwnd_gain_;
    uint64_t init_cwnd_;
    Mode mode_ = Mode::Startup;
    double pacing_gain_ = kHighGain;
    std::deque<BwSample> bw_filter_;
    double min_rtt_s_ = kInf;
    double min_rtt_stamp_ = -1;
    uint64_t round_count_ = 0;
    uint64_t next_round_seq_ = 0;
    double full_bw_ = 0;
    int full_bw_count_ = 0;
    bool filled_pipe_ = false;
    int cycle_index_ = 2;
    double cycle_stamp_ = 0;
    double probe_rtt_done_ = 0;
    bool conservative_ = false;
    uint64_t conserve_cwnd_ = 0;
};

inline std::unique_ptr<CongestionController> make_congestion_controller(
    const std::string& name, uint32_t mss, double bbr_cwnd_gain = 3.0) {
    if (name == "reno") return std::make_unique<RenoController>(mss);
    if (name == "cubic") return std::make_unique<CubicController>(mss);
    if (name == "bbr") return std::make_unique<BbrController>(mss, bbr_cwnd_gain);
    throw std::invalid_argument("unknown congestion controller: " + name);
}

} // namespace leosim
