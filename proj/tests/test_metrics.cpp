#include <catch2/catch_amalgamated.hpp>

#include "leosim/metrics.hpp"
#include "oracles.hpp"

using namespace leosim;

namespace {
DeliveryRecord rec(uint64_t seq, uint32_t size, double t, bool rtx = false) {
    DeliveryRecord d;
    d.seq = seq;
    d.payload_bytes = size;
    d.arrival_time_s = t;
    d.retransmitted = rtx;
    return d;
}
} // namespace

TEST_CASE("goodput series bins in-order byte progress") {
    SECTION("a steady stream fills every bin at the line rate") {
        std::vector<DeliveryRecord> ds;
        // 625 kB per 50 ms = 100 Mbps, one 1250-byte record every 0.1 ms
        for (int i = 0; i < 5000; ++i)
            ds.push_back(rec(static_cast<uint64_t>(i) * 1250, 1250, i * 1e-4));
        const auto bins = goodput_series(ds, 0.05, 0.5);
        REQUIRE(bins.size() == 10);
        for (const auto& b : bins) CHECK(b.goodput_bps == Catch::Approx(1e8));
    }
    SECTION("bins without deliveries report zero") {
        std::vector<DeliveryRecord> ds{rec(0, 1000, 0.01)};
        const auto bins = goodput_series(ds, 0.05, 0.2);
        REQUIRE(bins.size() == 4);
        CHECK(bins[0].goodput_bps > 0);
        CHECK(bins[1].goodput_bps == 0);
        CHECK(bins[2].goodput_bps == 0);
    }
    SECTION("625 kB inside one 50 ms bin is 100 Mbps") {
        std::vector<DeliveryRecord> ds;
        for (int i = 0; i < 5; ++i) ds.push_back(rec(i * 125000, 125000, 0.06 + i * 1e-3));
        const auto bins = goodput_series(ds, 0.05, 0.15);
        REQUIRE(bins.size() == 3);
        CHECK(bins[1].goodput_bps == Catch::Approx(1e8));
        CHECK(bins[0].goodput_bps == 0);
    }
    SECTION("out-of-order bytes only count once the hole fills") {
        std::vector<DeliveryRecord> ds{rec(1000, 1000, 0.01), rec(0, 1000, 0.06)};
        const auto bins = goodput_series(ds, 0.05, 0.1);
        REQUIRE(bins.size() == 2);
        CHECK(bins[0].goodput_bps == 0);
        CHECK(bins[1].goodput_bps == Catch::Approx(2000 * 8.0 / 0.05));
    }
    SECTION("conservation: bins integrate back to delivered bytes") {
        oracles::Rng rng(5);
        std::vector<DeliveryRecord> ds;
        uint64_t seq = 0;
        double t = 0;
        for (int i = 0; i < 1000; ++i) {
            ds.push_back(rec(seq, 1460, t));
            seq += 1460;
            t += rng.uniform() * 2e-3;
        }
        const double duration = 2.0;
        const auto bins = goodput_series(ds, 0.05, duration);
        double bytes = 0;
        for (const auto& b : bins) bytes += b.goodput_bps * 0.05 / 8.0;
        CHECK(bytes == Catch::Approx(1000.0 * 1460).epsilon(1e-9));
    }
}

TEST_CASE("ecdf") {
    SECTION("simple three-point distribution") {
        const Ecdf e = ecdf({1.0, 2.0, 3.0});
        CHECK(e.prob_at_or_below(2.0) == Catch::Approx(2.0 / 3.0));
        CHECK(e.prob_at_or_below(0.5) == 0.0);
        CHECK(e.prob_at_or_below(3.0) == 1.0);
        CHECK(ccdf_at(e, 2.0) == Catch::Approx(1.0 / 3.0));
    }
    SECTION("all-equal values step once") {
        const Ecdf e = ecdf({7.0, 7.0, 7.0});
        CHECK(e.prob_at_or_below(6.999) == 0.0);
        CHECK(e.prob_at_or_below(7.0) == 1.0);
    }
    SECTION("empty input throws") { CHECK_THROWS_AS(ecdf({}), EmptyInput); }
    SECTION("nondecreasing, right-continuous, reaches one") {
        oracles::Rng rng(9);
        std::vector<double> v;
        for (int i = 0; i < 1000; ++i) v.push_back(rng.uniform() * 100.0);
        const Ecdf e = ecdf(v);
        CHECK(e.probs.back() == 1.0);
        for (size_t i = 1; i < e.probs.size(); ++i) CHECK(e.probs[i] >= e.probs[i - 1]);
        // counting oracle on random thresholds
        for (int k = 0; k < 50; ++k) {
            const double x = rng.uniform() * 110.0 - 5.0;
            size_t cnt = 0;
            for (double val : v)
                if (val <= x) ++cnt;
            CHECK(e.prob_at_or_below(x) == Catch::Approx(static_cast<double>(cnt) / v.size()));
        }
    }
}

TEST_CASE("percentiles use nearest rank") {
    CHECK(percentile({1, 2, 3, 4}, 0.5) == 2.0);
    CHECK(percentile({5}, 0.99) == 5.0);
    CHECK(percentile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.9) == 9.0);
}

TEST_CASE("reordering detection") {
    SECTION("in-order arrivals have no reordering") {
        std::vector<DeliveryRecord> ds;
        for (int i = 0; i < 10; ++i) ds.push_back(rec(i * 100, 100, i * 0.01));
        const ReorderStats s = detect_reordering(ds);
        CHECK(s.reordered_count == 0);
        CHECK(s.max_reorder_extent_pkts == 0);
        CHECK(s.spurious_retx_count == 0);
    }
    SECTION("arrival order 0,2,1 is one late packet of extent one") {
        std::vector<DeliveryRecord> ds{rec(0, 1, 0.0), rec(2, 1, 0.1), rec(1, 1, 0.2)};
        const ReorderStats s = detect_reordering(ds);
        CHECK(s.reordered_count == 1);
        CHECK(s.max_reorder_extent_pkts == 1);
    }
    SECTION("a retransmission whose original also arrived is spurious") {
        std::vector<DeliveryRecord> ds{rec(0, 100, 0.0), rec(100, 100, 0.1, true),
                                       rec(100, 100, 0.2, false)};
        const ReorderStats s = detect_reordering(ds);
        CHECK(s.spurious_retx_count == 1);
    }
    SECTION("a retransmission whose original never arrived is not") {
        std::vector<DeliveryRecord> ds{rec(0, 100, 0.0), rec(100, 100, 0.1, true)};
        CHECK(detect_reordering(ds).spurious_retx_count == 0);
    }
}

TEST_CASE("streaming accumulator matches the list detector") {
    oracles::Rng rng(17);
    std::vector<DeliveryRecord> ds;
    uint64_t next = 0;
    std::vector<DeliveryRecord> swap_buffer;
    double t = 0;
    for (int i = 0; i < 2000; ++i) {
        DeliveryRecord d = rec(next, 1460, t);
        next += 1460;
        t += 1e-4;
        // hold some packets back to create reordering
        if (rng.uniform() < 0.1) {
            swap_buffer.push_back(d);
            continue;
        }
        ds.push_back(d);
        while (!swap_buffer.empty() && rng.uniform() < 0.4) {
            DeliveryRecord late = swap_buffer.front();
            swap_buffer.erase(swap_buffer.begin());
            late.arrival_time_s = t;
            ds.push_back(late);
        }
    }
    const ReorderStats expected = detect_reordering(ds);
    ReorderAccumulator acc(1460);
    for (const auto& d : ds) acc.on_delivery(d.seq, d.payload_bytes, d.arrival_time_s, d.retransmitted);
    CHECK(acc.stats().reordered_count == expected.reordered_count);
    CHECK(acc.stats().max_reorder_extent_pkts == expected.max_reorder_extent_pkts);
    CHECK(expected.reordered_count > 0);
    CHECK(acc.reorder_times().size() == expected.reordered_count);
}

TEST_CASE("spurious tracking with sender-side retransmit feed") {
    ReorderAccumulator acc(1460);
    acc.on_delivery(0, 1460, 0.1, false);
    acc.on_retransmit(0, 0.2);  // original already arrived: spurious
    CHECK(acc.stats().spurious_retx_count == 1);
    acc.on_retransmit(1460, 0.3);  // original never arrives: dropped, genuine
    CHECK(acc.stats().spurious_retx_count == 1);
    acc.on_retransmit(2920, 0.4);
    acc.on_delivery(2920, 1460, 0.5, true);   // only the rtx copy arrives
    CHECK(acc.stats().spurious_retx_count == 1);
    acc.on_delivery(2920, 1460, 0.6, false);  // late original: now spurious
    CHECK(acc.stats().spurious_retx_count == 2);
    CHECK(acc.spurious_times().size() == 2);
}

TEST_CASE("run summary") {
    SECTION("five of a thousand low samples is half a percent") {
        std::vector<MetricSample> bins(1000);
        for (size_t i = 0; i < bins.size(); ++i) {
            bins[i].time_s = i * 0.05;
            bins[i].goodput_bps = i < 5 ? 0.0 : 9e7;
            bins[i].srtt_s = 0.08;
        }
        const RunSummary s = summarize_run(bins, 1e8, 42, 7, 3, 11, 2);
        CHECK(s.low_goodput_fraction == Catch::Approx(0.005));
        CHECK(s.goodput_median_bps == 9e7);
        CHECK(s.rtt_p50_s == 0.08);
        CHECK(s.total_retransmissions == 42);
        CHECK(s.spurious_retransmissions == 7);
        CHECK(s.route_changes == 3);
        CHECK(s.reordered_packets == 11);
        CHECK(s.drops == 2);
    }
    SECTION("loss-free steady run has zero low-goodput fraction") {
        std::vector<MetricSample> bins(100);
        for (auto& b : bins) b.goodput_bps = 9.7e7;
        CHECK(summarize_run(bins, 1e8, 0, 0, 0, 0, 0).low_goodput_fraction == 0.0);
    }
}
