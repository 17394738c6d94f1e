#pragma once

#include <filesystem>
#include <sstream>

#include "leosim/simulation.hpp"

#include <json.hpp>

namespace leosim {

struct UnknownPreset : std::invalid_argument {
    explicit UnknownPreset(const std::string& name)
        : std::invalid_argument("unknown scenario preset: " + name) {}
};

struct ScenarioConfig {
    std::string name = "baseline";
    ConstellationConfig constellation;
    GroundStation gs_src, gs_dst;
    std::string cc_name = "cubic";
    double duration_s = 1000;
    double l3_interval_s = 30;
    double l2_interval_s = 15;
    double link_rate_bps = 1e8;
    double fso_range_km = 3000;
    int queue_capacity_pkts = 512;
    double bin_s = 0.05;
    uint64_t seed = 0;  // reserved for stochastic extensions; runs are deterministic
    double t_offset_s = 0;
    double motion_scale = 1;
    double bbr_cwnd_gain = 3;
    bool packet_trace = false;

    bool operator==(const ScenarioConfig& o) const {
        return name == o.name && constellation.num_planes == o.constellation.num_planes &&
               constellation.sats_per_plane == o.constellation.sats_per_plane &&
               constellation.altitude_km == o.constellation.altitude_km &&
               constellation.inclination_deg == o.constellation.inclination_deg &&
               constellation.raan_spread_deg == o.constellation.raan_spread_deg &&
               constellation.phase_offset_frac == o.constellation.phase_offset_frac &&
               gs_src.name == o.gs_src.name && gs_src.geo.latitude_deg == o.gs_src.geo.latitude_deg &&
               gs_src.geo.longitude_deg == o.gs_src.geo.longitude_deg &&
               gs_dst.name == o.gs_dst.name && gs_dst.geo.latitude_deg == o.gs_dst.geo.latitude_deg &&
               gs_dst.geo.longitude_deg == o.gs_dst.geo.longitude_deg &&
               gs_src.min_elevation_deg == o.gs_src.min_elevation_deg &&
               gs_dst.min_elevation_deg == o.gs_dst.min_elevation_deg &&
               cc_name == o.cc_name && duration_s == o.duration_s &&
               l3_interval_s == o.l3_interval_s && l2_interval_s == o.l2_interval_s &&
               link_rate_bps == o.link_rate_bps && fso_range_km == o.fso_range_km &&
               queue_capacity_pkts == o.queue_capacity_pkts && bin_s == o.bin_s &&
               seed == o.seed && t_offset_s == o.t_offset_s && motion_scale == o.motion_scale &&
               bbr_cwnd_gain == o.bbr_cwnd_gain && packet_trace == o.packet_trace;
    }

    ScheduleParams schedule_params() const {
        ScheduleParams sp;
        sp.constellation = constellation;
        sp.gs_src = gs_src;
        sp.gs_dst = gs_dst;
        sp.duration_s = duration_s;
        sp.l3_interval_s = l3_interval_s;
        sp.l2_interval_s = l2_interval_s;
        sp.fso_range_km = fso_range_km;
        sp.t_offset_s = t_offset_s;
        sp.motion_scale = motion_scale;
        return sp;
    }
    SimParams sim_params() const {
        SimParams p;
        p.duration_s = duration_s;
        p.link_rate_bps = link_rate_bps;
        p.queue_capacity_pkts = queue_capacity_pkts;
        p.cc_name = cc_name;
        p.bbr_cwnd_gain = bbr_cwnd_gain;
        p.bin_s = bin_s;
        p.packet_trace = packet_trace;
        return p;
    }
};

inline ScenarioConfig preset(const std::string& name) {
    ScenarioConfig cfg;
    cfg.name = name;
    cfg.gs_src = {"madrid", {40.4168, -3.7038, 0}, 10.0};
    cfg.gs_dst = {"tokyo", {35.6762, 139.6503, 0}, 10.0};
    if (name == "baseline") {
        // defaults
    } else if (name == "nine-planes") {
        cfg.constellation.num_planes = 9;
    } else if (name == "aalborg-capetown") {
        cfg.gs_src = {"aalborg", {57.0488, 9.9217, 0}, 10.0};
        cfg.gs_dst = {"capetown", {-33.9249, 18.4241, 0}, 10.0};
    } else {
        throw UnknownPreset(name);
    }
    return cfg;
}

// ---- flat sectioned config format ----

namespace detail {
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace detail

inline std::string serialize_config(const ScenarioConfig& c) {
    using detail::fmt_double;
    std::ostringstream o;
    o << "[scenario]\n"
      << "name=" << c.name << '\n'
      << "cc=" << c.cc_name << '\n'
      << "duration_s=" << fmt_double(c.duration_s) << '\n'
      << "seed=" << c.seed << '\n'
      << "t_offset_s=" << fmt_double(c.t_offset_s) << '\n'
      << "motion_scale=" << fmt_double(c.motion_scale) << '\n'
      << "src_name=" << c.gs_src.name << '\n'
      << "src_lat=" << fmt_double(c.gs_src.geo.latitude_deg) << '\n'
      << "src_lon=" << fmt_double(c.gs_src.geo.longitude_deg) << '\n'
      << "dst_name=" << c.gs_dst.name << '\n'
      << "dst_lat=" << fmt_double(c.gs_dst.geo.latitude_deg) << '\n'
      << "dst_lon=" << fmt_double(c.gs_dst.geo.longitude_deg) << '\n'
      << "min_elevation_deg=" << fmt_double(c.gs_src.min_elevation_deg) << '\n'
      << "[constellation]\n"
      << "planes=" << c.constellation.num_planes << '\n'
      << "sats_per_plane=" << c.constellation.sats_per_plane << '\n'
      << "altitude_km=" << fmt_double(c.constellation.altitude_km) << '\n'
      << "inclination_deg=" << fmt_double(c.constellation.inclination_deg) << '\n'
      << "raan_spread_deg=" << fmt_double(c.constellation.raan_spread_deg) << '\n'
      << "phase_offset_frac=" << fmt_double(c.constellation.phase_offset_frac) << '\n'
      << "[link]\n"
      << "rate_bps=" << fmt_double(c.link_rate_bps) << '\n'
      << "fso_range_km=" << fmt_double(c.fso_range_km) << '\n'
      << "queue_capacity_pkts=" << c.queue_capacity_pkts << '\n'
      << "l3_interval_s=" << fmt_double(c.l3_interval_s) << '\n'
      << "l2_interval_s=" << fmt_double(c.l2_interval_s) << '\n'
      << "[transport]\n"
      << "bbr_cwnd_gain=" << fmt_double(c.bbr_cwnd_gain) << '\n'
      << "[metrics]\n"
      << "bin_s=" << fmt_double(c.bin_s) << '\n'
      << "packet_trace=" << (c.packet_trace ? 1 : 0) << '\n';
    return o.str();
}

// Applies key=value lines over `base`. Unknown keys are errors.
inline ScenarioConfig parse_config(const std::string& text, ScenarioConfig base = {}) {
    ScenarioConfig c = base;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line = line.substr(start);
        if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        const auto dbl = [&] { return std::stod(val); };
        const auto num = [&] { return std::stoi(val); };
        if (key == "name") c.name = val;
        else if (key == "cc") c.cc_name = val;
        else if (key == "duration_s") c.duration_s = dbl();
        else if (key == "seed") c.seed = std::stoull(val);
        else if (key == "t_offset_s") c.t_offset_s = dbl();
        else if (key == "motion_scale") c.motion_scale = dbl();
        else if (key == "src_name") c.gs_src.name = val;
        else if (key == "src_lat") c.gs_src.geo.latitude_deg = dbl();
        else if (key == "src_lon") c.gs_src.geo.longitude_deg = dbl();
        else if (key == "dst_name") c.gs_dst.name = val;
        else if (key == "dst_lat") c.gs_dst.geo.latitude_deg = dbl();
        else if (key == "dst_lon") c.gs_dst.geo.longitude_deg = dbl();
        else if (key == "min_elevation_deg") {
            c.gs_src.min_elevation_deg = dbl();
            c.gs_dst.min_elevation_deg = c.gs_src.min_elevation_deg;
        } else if (key == "planes") c.constellation.num_planes = num();
        else if (key == "sats_per_plane") c.constellation.sats_per_plane = num();
        else if (key == "altitude_km") c.constellation.altitude_km = dbl();
        else if (key == "inclination_deg") c.constellation.inclination_deg = dbl();
        else if (key == "raan_spread_deg") c.constellation.raan_spread_deg = dbl();
        else if (key == "phase_offset_frac") c.constellation.phase_offset_frac = dbl();
        else if (key == "rate_bps") c.link_rate_bps = dbl();
        else if (key == "fso_range_km") c.fso_range_km = dbl();
        else if (key == "queue_capacity_pkts") c.queue_capacity_pkts = num();
        else if (key == "l3_interval_s") c.l3_interval_s = dbl();
        else if (key == "l2_interval_s") c.l2_interval_s = dbl();
        else if (key == "bbr_cwnd_gain") c.bbr_cwnd_gain = dbl();
        else if (key == "bin_s") c.bin_s = dbl();
        else if (key == "packet_trace") c.packet_trace = num() != 0;
        else throw std::invalid_argument("config line " + std::to_string(lineno) +
                                         ": unknown key '" + key + "'");
    }
    return c;
}

struct ScenarioOutput {
    RunResult run;
    RunSummary summary;
    double propagation_spread_s = 0;
    double propagation_min_s = 0, propagation_max_s = 0;
};

inline nlohmann::json summary_json(const ScenarioConfig& cfg, const ScenarioOutput& out) {
    nlohmann::json j;
    j["scenario"] = cfg.name;
    j["cc"] = cfg.cc_name;
    j["duration_s"] = cfg.duration_s;
    j["seed"] = cfg.seed;
    j["planes"] = cfg.constellation.num_planes;
    j["sats_per_plane"] = cfg.constellation.sats_per_plane;
    j["goodput_mean_bps"] = out.summary.goodput_mean_bps;
    j["goodput_median_bps"] = out.summary.goodput_median_bps;
    j["rtt_p50_s"] = out.summary.rtt_p50_s;
    j["rtt_p90_s"] = out.summary.rtt_p90_s;
    j["rtt_p99_s"] = out.summary.rtt_p99_s;
    j["low_goodput_fraction"] = out.summary.low_goodput_fraction;
    j["retransmissions"] = out.summary.total_retransmissions;
    j["spurious_retransmissions"] = out.summary.spurious_retransmissions;
    j["route_changes"] = out.summary.route_changes;
    j["reordered_packets"] = out.summary.reordered_packets;
    j["max_reorder_extent_pkts"] = out.run.reorder.max_reorder_extent_pkts;
    j["drops"] = out.summary.drops;
    j["rto_count"] = out.run.rto_count;
    j["packets_injected"] = out.run.injected;
    j["packets_delivered"] = out.run.delivered;
    j["packets_in_flight_at_end"] = out.run.in_flight_at_end;
    j["delivered_in_order_bytes"] = out.run.delivered_in_order_bytes;
    j["propagation_min_s"] = out.propagation_min_s;
    j["propagation_max_s"] = out.propagation_max_s;
    j["propagation_spread_s"] = out.propagation_spread_s;
    return j;
}

inline ScenarioOutput run_scenario(const ScenarioConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    const RouteSchedule sched = compute_route_schedule(cfg.schedule_params());
    SimParams sp = cfg.sim_params();
    if (sp.packet_trace) sp.packet_trace_path = out_dir + "/packets.csv";

    ScenarioOutput out;
    out.run = simulate(sched, sp);
    out.propagation_min_s = std::numeric_limits<double>::infinity();
    for (const auto& e : sched.epochs) {
        out.propagation_min_s = std::min(out.propagation_min_s, e.route.total_propagation_s);
        out.propagation_max_s = std::max(out.propagation_max_s, e.route.total_propagation_s);
    }
    out.propagation_spread_s = out.propagation_max_s - out.propagation_min_s;
    out.summary = summarize_run(out.run.bins, cfg.link_rate_bps, out.run.retx_total,
                                out.run.reorder.spurious_retx_count,
                                out.run.route_change_times.size(),
                                out.run.reorder.reordered_count, out.run.dropped);

    write_goodput_csv(out_dir + "/goodput.csv", out.run.bins);
    write_rtt_csv(out_dir + "/rtt.csv", out.run.bins);
    write_cwnd_csv(out_dir + "/cwnd.csv", out.run.bins);
    write_events_csv(out_dir + "/events.csv", out.run.events);
    {
        std::ofstream f(out_dir + "/routes.txt");
        if (!f) throw std::runtime_error("cannot write routes.txt");
        f << export_route_schedule(sched, cfg.constellation, cfg.gs_src.name, cfg.gs_dst.name);
    }
    {
        std::ofstream f(out_dir + "/summary.json");
        if (!f) throw std::runtime_error("cannot write summary.json");
        f << summary_json(cfg, out).dump(2) << '\n';
    }
    return out;
}

inline std::string one_line_summary(const ScenarioConfig& cfg, const ScenarioOutput& out) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%s cc=%s %.0fs: goodput median %.2f Mbps, srtt median %.1f ms, retx %llu "
                  "(spurious %llu), reordered %llu, route changes %llu, drops %llu",
                  cfg.name.c_str(), cfg.cc_name.c_str(), cfg.duration_s,
                  out.summary.goodput_median_bps / 1e6, out.summary.rtt_p50_s * 1e3,
                  static_cast<unsigned long long>(out.summary.total_retransmissions),
                  static_cast<unsigned long long>(out.summary.spurious_retransmissions),
                  static_cast<unsigned long long>(out.summary.reordered_packets),
                  static_cast<unsigned long long>(out.summary.route_changes),
                  static_cast<unsigned long long>(out.summary.drops));
    return buf;
}

} // namespace leosim
