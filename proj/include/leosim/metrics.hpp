#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "leosim/netem.hpp"

namespace leosim {

struct MetricSample {
    double time_s = 0;  // bin start
    double goodput_bps = 0;
    double srtt_s = 0;
    uint64_t cwnd_bytes = 0;
    uint64_t retransmissions_in_bin = 0;
};

struct ReorderStats {
    uint64_t reordered_count = 0;  // arrivals below the frontier (late)
    uint64_t max_reorder_extent_pkts = 0;
    uint64_t spurious_retx_count = 0;  // retransmitted segments whose original arrived
};

struct TraceEvent {
    double time_s = 0;
    std::string kind;  // route-change | retransmission | rto | phase-change | drop
    std::string detail;
};

class Fenwick {
public:
    void ensure(size_t n) {
        if (n <= counts_.size()) return;
        size_t cap = counts_.empty() ? 1024 : counts_.size();
        while (cap < n) cap *= 2;
        counts_.resize(cap, 0);
        tree_.assign(cap + 1, 0);
        for (size_t i = 0; i < counts_.size(); ++i)
            if (counts_[i]) add_tree(i, counts_[i]);
    }
    void add(size_t i, uint32_t v) {
        ensure(i + 1);
        counts_[i] += v;
        add_tree(i, v);
    }
    // sum of counts over [0, i]
    uint64_t prefix(size_t i) const {
        if (tree_.empty()) return 0;
        if (i + 1 > counts_.size()) i = counts_.size() - 1;
        uint64_t s = 0;
        for (size_t k = i + 1; k > 0; k -= k & (~k + 1)) s += tree_[k];
        return s;
    }

private:
    void add_tree(size_t i, uint64_t v) {
        for (size_t k = i + 1; k <= counts_.size(); k += k & (~k + 1)) tree_[k] += v;
    }
    std::vector<uint32_t> counts_;
    std::vector<uint64_t> tree_;
};

// Streaming reorder/spurious detector for MSS-aligned segment streams.
// A delivery is late when its seq is below the arrival frontier; its extent
// is the number of earlier deliveries carrying a higher seq.
class ReorderAccumulator {
public:
    explicit ReorderAccumulator(uint32_t segment_bytes) : seg_(segment_bytes) {}

    void on_delivery(uint64_t seq, uint32_t size, double t, bool retransmitted) {
        const size_t idx = static_cast<size_t>(seq / seg_);
        if (seq < frontier_) {
            ++stats_.reordered_count;
            const uint64_t extent = total_ - counts_.prefix(idx);
            stats_.max_reorder_extent_pkts = std::max(stats_.max_reorder_extent_pkts, extent);
            reorder_times_.push_back(t);
        }
        counts_.add(idx, 1);
        ++total_;
        frontier_ = std::max(frontier_, seq + size);
        mark(idx, retransmitted ? kRetx : kOrig, t);
    }
    void on_retransmit(uint64_t seq, double t) {
        mark(static_cast<size_t>(seq / seg_), kRetx, t);
    }

    const ReorderStats& stats() const { return stats_; }
    const std::vector<double>& reorder_times() const { return reorder_times_; }
    const std::vector<double>& spurious_times() const { return spurious_times_; }
    uint64_t frontier_bytes() const { return frontier_; }

private:
    static constexpr uint8_t kOrig = 1, kRetx = 2, kCounted = 4;
    void mark(size_t idx, uint8_t bit, double t) {
        if (idx >= flags_.size()) flags_.resize(std::max(flags_.size() * 2, idx + 1024), 0);
        flags_[idx] |= bit;
        if ((flags_[idx] & (kOrig | kRetx)) == (kOrig | kRetx) && !(flags_[idx] & kCounted)) {
            flags_[idx] |= kCounted;
            ++stats_.spurious_retx_count;
            spurious_times_.push_back(t);
        }
    }

    uint32_t seg_;
    uint64_t frontier_ = 0;
    uint64_t total_ = 0;
    Fenwick counts_;
    std::vector<uint8_t> flags_;
    ReorderStats stats_;
    std::vector<double> reorder_times_;
    std::vector<double> spurious_times_;
};

// List form for arbitrary (not necessarily aligned) sequences: coordinate-
// compresses seqs, then applies the same frontier rule.
inline ReorderStats detect_reordering(const std::vector<DeliveryRecord>& deliveries) {
    std::vector<uint64_t> seqs;
    seqs.reserve(deliveries.size());
    for (const auto& d : deliveries) seqs.push_back(d.seq);
    std::sort(seqs.begin(), seqs.end());
    seqs.erase(std::unique(seqs.begin(), seqs.end()), seqs.end());
    const auto rank = [&](uint64_t s) {
        return static_cast<size_t>(std::lower_bound(seqs.begin(), seqs.end(), s) - seqs.begin());
    };

    ReorderStats stats;
    Fenwick counts;
    std::vector<uint8_t> flags(seqs.size(), 0);
    uint64_t frontier = 0, total = 0;
    for (const auto& d : deliveries) {
        const size_t idx = rank(d.seq);
        if (d.seq < frontier) {
            ++stats.reordered_count;
            stats.max_reorder_extent_pkts =
                std::max(stats.max_reorder_extent_pkts, total - counts.prefix(idx));
        }
        counts.add(idx, 1);
        ++total;
        frontier = std::max(frontier, d.seq + d.payload_bytes);
        flags[idx] |= d.retransmitted ? 2 : 1;
        if ((flags[idx] & 3) == 3 && !(flags[idx] & 4)) {
            flags[idx] |= 4;
            ++stats.spurious_retx_count;
        }
    }
    return stats;
}

// In-order byte progress (contiguity over seq space) binned over [0, duration).
inline std::vector<MetricSample> goodput_series(const std::vector<DeliveryRecord>& deliveries,
                                                double bin_s, double duration_s) {
    if (bin_s <= 0) throw std::invalid_argument("bin_s must be > 0");
    const size_t nbins = static_cast<size_t>(std::ceil(duration_s / bin_s));
    std::vector<MetricSample> out(nbins);
    for (size_t i = 0; i < nbins; ++i) out[i].time_s = i * bin_s;

    uint64_t rcv_next = 0;
    std::map<uint64_t, uint32_t> buffered;
    for (const auto& d : deliveries) {
        const uint64_t before = rcv_next;
        if (d.seq == rcv_next) {
            rcv_next += d.payload_bytes;
            auto it = buffered.begin();
            while (it != buffered.end() && it->first <= rcv_next) {
                rcv_next = std::max(rcv_next, it->first + it->second);
                it = buffered.erase(it);
            }
        } else if (d.seq > rcv_next) {
            buffered.emplace(d.seq, d.payload_bytes);
        }
        const uint64_t progressed = rcv_next - before;
        if (progressed == 0) continue;
        size_t bin = static_cast<size_t>(d.arrival_time_s / bin_s);
        if (bin >= nbins) bin = nbins - 1;
        out[bin].goodput_bps += static_cast<double>(progressed);
    }
    for (auto& s : out) s.goodput_bps = s.goodput_bps * 8.0 / bin_s;
    return out;
}

struct Ecdf {
    std::vector<double> values;  // sorted
    std::vector<double> probs;   // (0,1], right-continuous

    double prob_at_or_below(double x) const {
        const auto it = std::upper_bound(values.begin(), values.end(), x);
        return static_cast<double>(it - values.begin()) / values.size();
    }
};

struct EmptyInput : std::invalid_argument {
    EmptyInput() : std::invalid_argument("empty input") {}
};

inline Ecdf ecdf(std::vector<double> values) {
    if (values.empty()) throw EmptyInput();
    std::sort(values.begin(), values.end());
    Ecdf e;
    e.probs.resize(values.size());
    for (size_t i = 0; i < values.size(); ++i)
        e.probs[i] = static_cast<double>(i + 1) / values.size();
    e.values = std::move(values);
    return e;
}

inline double ccdf_at(const Ecdf& e, double x) { return 1.0 - e.prob_at_or_below(x); }

// nearest-rank percentile, p in [0,1]
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw EmptyInput();
    std::sort(values.begin(), values.end());
    const double r = std::ceil(p * values.size());
    size_t idx = r <= 1 ? 0 : static_cast<size_t>(r) - 1;
    if (idx >= values.size()) idx = values.size() - 1;
    return values[idx];
}

struct RunSummary {
    double goodput_mean_bps = 0;
    double goodput_median_bps = 0;
    double rtt_p50_s = 0, rtt_p90_s = 0, rtt_p99_s = 0;
    double low_goodput_fraction = 0;  // bins below 50% of link capacity
    uint64_t total_retransmissions = 0;
    uint64_t spurious_retransmissions = 0;
    uint64_t route_changes = 0;
    uint64_t reordered_packets = 0;
    uint64_t drops = 0;
};

inline RunSummary summarize_run(const std::vector<MetricSample>& bins, double capacity_bps,
                                uint64_t retx, uint64_t spurious, uint64_t route_changes,
                                uint64_t reordered, uint64_t drops) {
    RunSummary s;
    s.total_retransmissions = retx;
    s.spurious_retransmissions = spurious;
    s.route_changes = route_changes;
    s.reordered_packets = reordered;
    s.drops = drops;
    if (bins.empty()) return s;
    std::vector<double> gp, rtt;
    gp.reserve(bins.size());
    rtt.reserve(bins.size());
    size_t low = 0;
    for (const auto& b : bins) {
        gp.push_back(b.goodput_bps);
        if (b.srtt_s > 0) rtt.push_back(b.srtt_s);
        if (b.goodput_bps < 0.5 * capacity_bps) ++low;
    }
    s.goodput_mean_bps = std::accumulate(gp.begin(), gp.end(), 0.0) / gp.size();
    s.goodput_median_bps = percentile(gp, 0.5);
    s.low_goodput_fraction = static_cast<double>(low) / bins.size();
    if (!rtt.empty()) {
        s.rtt_p50_s = percentile(rtt, 0.5);
        s.rtt_p90_s = percentile(rtt, 0.9);
        s.rtt_p99_s = percentile(rtt, 0.99);
    }
    return s;
}

// ---- CSV export, column orders fixed ----

inline void write_goodput_csv(const std::string& path, const std::vector<MetricSample>& bins) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "time_s,goodput_bps\n";
    char line[96];
    for (const auto& b : bins) {
        std::snprintf(line, sizeof line, "%.4f,%.3f\n", b.time_s, b.goodput_bps);
        f << line;
    }
}

inline void write_rtt_csv(const std::string& path, const std::vector<MetricSample>& bins) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "time_s,srtt_s\n";
    char line[96];
    for (const auto& b : bins) {
        std::snprintf(line, sizeof line, "%.4f,%.9f\n", b.time_s, b.srtt_s);
        f << line;
    }
}

inline void write_cwnd_csv(const std::string& path, const std::vector<MetricSample>& bins) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "time_s,cwnd_bytes,retx_cum\n";
    char line[96];
    uint64_t cum = 0;
    for (const auto& b : bins) {
        cum += b.retransmissions_in_bin;
        std::snprintf(line, sizeof line, "%.4f,%llu,%llu\n", b.time_s,
                      static_cast<unsigned long long>(b.cwnd_bytes),
                      static_cast<unsigned long long>(cum));
        f << line;
    }
}

inline void write_events_csv(const std::string& path, const std::vector<TraceEvent>& events) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "time_s,kind,detail\n";
    char stamp[32];
    for (const auto& e : events) {
        std::snprintf(stamp, sizeof stamp, "%.9f", e.time_s);
        f << stamp << ',' << e.kind << ',' << e.detail << '\n';
    }
}

} // namespace leosim
