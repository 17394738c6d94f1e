#pragma once

#include <algorithm>
#include <cstdio>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "leosim/geometry.hpp"

// Time-varying ISL graph and shortest-distance routing. Node ids are
// plane-major satellite indices; the two ground stations take the next two
// ids after the satellites.

namespace leosim {

struct NoVisibleSatellite : std::runtime_error {
    double time_s;
    NoVisibleSatellite(const std::string& station, double t)
        : std::runtime_error("no satellite above elevation mask for " + station +
                             " at t=" + std::to_string(t)),
          time_s(t) {}
};

struct UnreachableRoute : std::runtime_error {
    double time_s;
    explicit UnreachableRoute(double t)
        : std::runtime_error("destination unreachable at t=" + std::to_string(t)), time_s(t) {}
};

struct GroundStation {
    std::string name;
    GeoCoordinate geo;
    double min_elevation_deg = 10.0;
};

struct IslGraph {
    int num_nodes = 0;
    std::vector<std::vector<std::pair<int, double>>> adj;  // (neighbor, km)

    explicit IslGraph(int n = 0) : num_nodes(n), adj(n) {}

    void add_node() {
        ++num_nodes;
        adj.emplace_back();
    }
    bool has_edge(int a, int b) const {
        for (const auto& [n, w] : adj[a])
            if (n == b) return true;
        return false;
    }
    void add_edge(int a, int b, double km) {
        if (a == b || has_edge(a, b)) return;
        adj[a].emplace_back(b, km);
        adj[b].emplace_back(a, km);
    }
    size_t edge_count() const {
        size_t deg = 0;
        for (const auto& v : adj) deg += v.size();
        return deg / 2;
    }
};

struct Route {
    std::vector<int> nodes;      // (gs_src, sat..., gs_dst)
    std::vector<double> hop_km;  // nodes.size()-1 entries, frozen at computation
    double total_propagation_s = 0;

    bool operator==(const Route&) const = default;
    int hop_count() const { return static_cast<int>(hop_km.size()); }
};

inline double route_propagation_delay_s(const Route& r) {
    double km = 0;
    for (double d : r.hop_km) km += d;
    return km / kLightSpeedKmS;
}

// Satellite-mesh graph at time t: intra-plane ring edges plus one edge per
// satellite to its nearest neighbor in each adjacent plane. The seam between
// the first and last plane carries no links. Edges beyond fso_range_km are
// dropped.
inline IslGraph build_isl_graph(const ConstellationConfig& cfg, double t,
                                double fso_range_km = 3000.0) {
    cfg.validate();
    const int P = cfg.num_planes, Q = cfg.sats_per_plane;
    std::vector<PositionKm> pos(static_cast<size_t>(P) * Q);
    for (int p = 0; p < P; ++p)
        for (int s = 0; s < Q; ++s)
            pos[p * Q + s] = satellite_position(cfg, {p, s}, t);

    IslGraph g(P * Q);
    for (int p = 0; p < P; ++p) {
        for (int s = 0; s < Q; ++s) {
            const int id = p * Q + s;
            const int ring_next = p * Q + (s + 1) % Q;
            double d = euclidean_distance_km(pos[id], pos[ring_next]);
            if (d <= fso_range_km) g.add_edge(id, ring_next, d);
            // nearest satellite in each adjacent plane (no seam wraparound)
            for (int dp : {-1, 1}) {
                const int q = p + dp;
                if (q < 0 || q >= P) continue;
                int best = -1;
                double best_d = std::numeric_limits<double>::infinity();
                for (int s2 = 0; s2 < Q; ++s2) {
                    const double dd = euclidean_distance_km(pos[id], pos[q * Q + s2]);
                    if (dd < best_d) {
                        best_d = dd;
                        best = q * Q + s2;
                    }
                }
                if (best >= 0 && best_d <= fso_range_km) g.add_edge(id, best, best_d);
            }
        }
    }
    return g;
}

// Highest-elevation visible satellite; ties resolve to the smaller id.
inline SatelliteId select_access_satellite(const GroundStation& gs, const ConstellationConfig& cfg,
                                           double t) {
    const PositionKm gp = ground_position(gs.geo, t);
    SatelliteId best{};
    double best_elev = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (int p = 0; p < cfg.num_planes; ++p) {
        for (int s = 0; s < cfg.sats_per_plane; ++s) {
            const double e = elevation_angle_deg(gp, satellite_position(cfg, {p, s}, t));
            if (e >= gs.min_elevation_deg && e > best_elev) {
                best_elev = e;
                best = {p, s};
                found = true;
            }
        }
    }
    if (!found) throw NoVisibleSatellite(gs.name, t);
    return best;
}

// Minimum-distance path; equal-cost ties resolve to the lexicographically
// smallest node sequence. Runs Dijkstra from dst, then walks forward from
// src always taking the smallest neighbor that stays on a shortest path.
inline Route shortest_route(const IslGraph& g, int src, int dst, double at_time = 0) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(g.num_nodes, kInf);
    dist[dst] = 0;
    using QE = std::pair<double, int>;
    std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
    pq.emplace(0.0, dst);
    while (!pq.empty()) {
        auto [d, v] = pq.top();
        pq.pop();
        if (d > dist[v]) continue;
        for (const auto& [u, w] : g.adj[v]) {
            const double nd = d + w;
            if (nd < dist[u]) {
                dist[u] = nd;
                pq.emplace(nd, u);
            }
        }
    }
    if (dist[src] == kInf) throw UnreachableRoute(at_time);

    Route r;
    r.nodes.push_back(src);
    int v = src;
    int guard = 0;
    while (v != dst) {
        int next = -1;
        double hop = 0;
        for (const auto& [u, w] : g.adj[v]) {
            if (w + dist[u] == dist[v] && (next < 0 || u < next)) {
                next = u;
                hop = w;
            }
        }
        if (next < 0 || ++guard > g.num_nodes) throw UnreachableRoute(at_time);
        r.nodes.push_back(next);
        r.hop_km.push_back(hop);
        v = next;
    }
    r.total_propagation_s = route_propagation_delay_s(r);
    return r;
}

struct RouteEpoch {
    double start_s = 0;
    Route route;
};

struct RouteSchedule {
    double duration_s = 0;
    int gs_src_node = 0, gs_dst_node = 0;
    std::vector<RouteEpoch> epochs;

    std::vector<double> route_change_times() const {
        std::vector<double> out;
        for (size_t i = 1; i < epochs.size(); ++i) out.push_back(epochs[i].start_s);
        return out;
    }
    int epoch_index_at(double t) const {
        int lo = 0, hi = static_cast<int>(epochs.size()) - 1;
        while (lo < hi) {
            const int mid = (lo + hi + 1) / 2;
            if (epochs[mid].start_s <= t) lo = mid;
            else hi = mid - 1;
        }
        return lo;
    }
    const Route& route_at(double t) const { return epochs[epoch_index_at(t)].route; }
};

struct ScheduleParams {
    ConstellationConfig constellation;
    GroundStation gs_src, gs_dst;
    double duration_s = 1000;
    double l3_interval_s = 30;
    double l2_interval_s = 15;
    double fso_range_km = 3000;
    double t_offset_s = 0;    // constellation evaluation epoch offset
    double motion_scale = 1;  // 0 freezes the topology

    void validate() const {
        constellation.validate();
        if (duration_s <= 0) throw std::invalid_argument("duration_s must be > 0");
        if (l2_interval_s <= 0 || l3_interval_s <= 0)
            throw std::invalid_argument("update intervals must be > 0");
        const double k = l3_interval_s / l2_interval_s;
        if (std::abs(k - std::round(k)) > 1e-9)
            throw std::invalid_argument("l3_interval_s must be a multiple of l2_interval_s");
    }
};

// Attachments re-evaluated on the l2 grid; the full path recomputed on the
// l3 grid and additionally whenever an attachment changed. Consecutive
// identical routes collapse into one epoch, so epochs mark actual changes.
inline RouteSchedule compute_route_schedule(const ScheduleParams& params) {
    params.validate();
    const ConstellationConfig& cfg = params.constellation;
    const int sat_count = cfg.total_sats();
    const int src_node = sat_count, dst_node = sat_count + 1;
    const int l3_every = static_cast<int>(std::round(params.l3_interval_s / params.l2_interval_s));

    RouteSchedule sched;
    sched.duration_s = params.duration_s;
    sched.gs_src_node = src_node;
    sched.gs_dst_node = dst_node;

    SatelliteId prev_src_sat{-1, -1}, prev_dst_sat{-1, -1};
    for (int k = 0; k * params.l2_interval_s < params.duration_s; ++k) {
        const double t = k * params.l2_interval_s;
        const double t_eval = params.t_offset_s + params.motion_scale * t;
        SatelliteId src_sat, dst_sat;
        try {
            src_sat = select_access_satellite(params.gs_src, cfg, t_eval);
            dst_sat = select_access_satellite(params.gs_dst, cfg, t_eval);
        } catch (NoVisibleSatellite& e) {
            e.time_s = t;
            throw;
        }
        const bool attachment_changed = src_sat != prev_src_sat || dst_sat != prev_dst_sat;
        prev_src_sat = src_sat;
        prev_dst_sat = dst_sat;
        if (k % l3_every != 0 && !attachment_changed) continue;

        IslGraph g = build_isl_graph(cfg, t_eval, params.fso_range_km);
        g.add_node();  // src gs
        g.add_node();  // dst gs
        const PositionKm sp = ground_position(params.gs_src.geo, t_eval);
        const PositionKm dp = ground_position(params.gs_dst.geo, t_eval);
        g.add_edge(src_node, src_sat.flat_index(cfg),
                   euclidean_distance_km(sp, satellite_position(cfg, src_sat, t_eval)));
        g.add_edge(dst_node, dst_sat.flat_index(cfg),
                   euclidean_distance_km(dp, satellite_position(cfg, dst_sat, t_eval)));

        Route route = shortest_route(g, src_node, dst_node, t);
        if (sched.epochs.empty() || !(route == sched.epochs.back().route))
            sched.epochs.push_back({t, std::move(route)});
    }
    return sched;
}

inline std::string node_name(int node, const ConstellationConfig& cfg,
                             const std::string& src_name, const std::string& dst_name) {
    const int sat_count = cfg.total_sats();
    if (node == sat_count) return src_name;
    if (node == sat_count + 1) return dst_name;
    const SatelliteId sat = SatelliteId::from_flat(node, cfg);
    char buf[32];
    std::snprintf(buf, sizeof buf, "p%ds%d", sat.plane, sat.slot);
    return buf;
}

// One record per epoch: start time, node list, hop distances, total delay.
inline std::string export_route_schedule(const RouteSchedule& sched,
                                         const ConstellationConfig& cfg,
                                         const std::string& src_name,
                                         const std::string& dst_name) {
    std::string out;
    char buf[64];
    for (size_t i = 0; i < sched.epochs.size(); ++i) {
        const RouteEpoch& e = sched.epochs[i];
        std::snprintf(buf, sizeof buf, "epoch=%zu start_s=%.3f delay_ms=%.6f nodes=", i,
                      e.start_s, e.route.total_propagation_s * 1e3);
        out += buf;
        for (size_t n = 0; n < e.route.nodes.size(); ++n) {
            if (n) out += '|';
            out += node_name(e.route.nodes[n], cfg, src_name, dst_name);
        }
        out += " hops_km=";
        for (size_t h = 0; h < e.route.hop_km.size(); ++h) {
            if (h) out += ',';
            std::snprintf(buf, sizeof buf, "%.6f", e.route.hop_km[h]);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

} // namespace leosim
