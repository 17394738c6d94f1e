#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "leosim/scenario.hpp"

// Exit codes: 0 success, 1 infeasible scenario (no visible satellite /
// unreachable destination), 2 configuration or IO error.

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot read config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TCP-over-LEO route-change simulator"};

    std::string scenario_flag, cc, out_dir = "out", config_path;
    double duration = -1, bin_ms = -1, t_offset = 0;
    int queue_pkts = -1, planes = -1, sats_per_plane = -1, sweep = 0;
    uint64_t seed = 0;
    bool packet_trace = false;

    auto* opt_scenario =
        app.add_option("--scenario", scenario_flag,
                       "Scenario preset: baseline | nine-planes | aalborg-capetown");
    auto* opt_cc = app.add_option("--cc", cc, "Congestion control: reno | cubic | bbr");
    auto* opt_duration = app.add_option("--duration", duration, "Run length in seconds");
    app.add_option("--out", out_dir, "Output directory (default: out)");
    auto* opt_config = app.add_option("--config", config_path, "Config file (key=value sections)");
    auto* opt_seed = app.add_option("--seed", seed, "Run seed recorded in outputs");
    auto* opt_bin = app.add_option("--bin-ms", bin_ms, "Metric sampling bin in milliseconds");
    auto* opt_queue = app.add_option("--queue-pkts", queue_pkts, "Per-ISL drop-tail queue capacity");
    auto* opt_planes = app.add_option("--planes", planes, "Number of orbital planes");
    auto* opt_sats = app.add_option("--sats-per-plane", sats_per_plane, "Satellites per plane");
    auto* opt_trace = app.add_flag("--packet-trace", packet_trace, "Write per-packet trace");
    auto* opt_toff =
        app.add_option("--t-offset", t_offset, "Constellation evaluation epoch offset (s)");
    app.add_option("--sweep", sweep, "Run N isolated runs with spread start offsets");

    CLI11_PARSE(app, argc, argv);

    leosim::ScenarioConfig cfg;
    try {
        std::string file_text;
        if (*opt_config) file_text = read_file(config_path);
        std::string base_name = "baseline";
        if (!file_text.empty()) base_name = leosim::parse_config(file_text).name;
        if (*opt_scenario) base_name = scenario_flag;
        cfg = leosim::preset(base_name);
        if (!file_text.empty()) cfg = leosim::parse_config(file_text, cfg);
        cfg.name = base_name;
        if (*opt_cc) cfg.cc_name = cc;
        if (*opt_duration) cfg.duration_s = duration;
        if (*opt_seed) cfg.seed = seed;
        if (*opt_bin) cfg.bin_s = bin_ms / 1e3;
        if (*opt_queue) cfg.queue_capacity_pkts = queue_pkts;
        if (*opt_planes) cfg.constellation.num_planes = planes;
        if (*opt_sats) cfg.constellation.sats_per_plane = sats_per_plane;
        if (*opt_trace) cfg.packet_trace = packet_trace;
        if (*opt_toff) cfg.t_offset_s = t_offset;
        cfg.constellation.validate();
        if (cfg.duration_s <= 0 || cfg.bin_s <= 0 || cfg.queue_capacity_pkts <= 0)
            throw std::invalid_argument("duration, bin and queue capacity must be positive");
        if (cfg.cc_name != "reno" && cfg.cc_name != "cubic" && cfg.cc_name != "bbr")
            throw std::invalid_argument("unknown congestion controller: " + cfg.cc_name);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (sweep > 1) {
            for (int k = 0; k < sweep; ++k) {
                leosim::ScenarioConfig run_cfg = cfg;
                run_cfg.t_offset_s = cfg.t_offset_s + k * cfg.duration_s / sweep;
                char sub[32];
                std::snprintf(sub, sizeof sub, "/run_%03d", k);
                const auto out = leosim::run_scenario(run_cfg, out_dir + sub);
                std::cout << "run_" << k << " " << leosim::one_line_summary(run_cfg, out) << '\n';
            }
        } else {
            const auto out = leosim::run_scenario(cfg, out_dir);
            std::cout << leosim::one_line_summary(cfg, out) << '\n';
        }
    } catch (const leosim::NoVisibleSatellite& e) {
        std::cerr << "infeasible scenario: " << e.what() << '\n';
        return 1;
    } catch (const leosim::UnreachableRoute& e) {
        std::cerr << "infeasible scenario: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
