// Command-line front end: experiment runner, log inspector, report checker.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hpaxos/harness.hpp"
#include "hpaxos/storage.hpp"

namespace {

using namespace hpaxos;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string summarize(const Payload& p) {
    std::ostringstream out;
    out << std::setw(16) << std::left << body_name(p.body) << " instance=" << p.instance << " sender=" << p.sender;
    std::visit(
        [&](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, Prepare>) {
                out << " ballot=" << to_string(b.ballot);
            } else if constexpr (std::is_same_v<T, Promise>) {
                out << " ballot=" << to_string(b.ballot) << " entries=" << b.accepted.size();
            } else if constexpr (std::is_same_v<T, Propose> || std::is_same_v<T, Accepted>) {
                out << " ballot=" << to_string(b.ballot) << " value_bytes=" << b.value.size();
            } else if constexpr (std::is_same_v<T, Decision> || std::is_same_v<T, ClientRequest>) {
                out << " value_bytes=" << b.value.size();
            } else if constexpr (std::is_same_v<T, StateDigest> || std::is_same_v<T, Applied>) {
                out << " checksum=" << std::hex << std::setw(16) << std::setfill('0') << b.checksum;
            } else if constexpr (std::is_same_v<T, Nack>) {
                out << " promised=" << to_string(b.promised);
            }
        },
        p.body);
    return out.str();
}

int replay_log(const std::string& path) {
    const auto text = read_file(path);
    const Bytes bytes(text.begin(), text.end());
    ReplayResult result;
    try {
        result = parse_log(bytes);
    } catch (const StorageCorruption& e) {
        std::cout << "corrupt record at offset " << e.offset() << ": " << e.what() << "\n";
        return 1;
    }
    for (std::size_t i = 0; i < result.payloads.size(); ++i) {
        std::cout << std::setw(6) << i << "  " << summarize(result.payloads[i]) << "\n";
    }
    std::cout << result.payloads.size() << " records, " << result.valid_bytes << " bytes valid";
    if (result.torn_tail) std::cout << ", torn tail of " << bytes.size() - result.valid_bytes << " bytes";
    std::cout << "\n";
    try {
        (void)recover_state(result.payloads, true);
    } catch (const RecoveryError& e) {
        std::cout << "inconsistent log (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return 1;
    }
    return 0;
}

// 0 well-formed and clean, 1 well-formed but not clean, 2 malformed.
int verify_report(const std::string& path) {
    ExperimentReport report;
    try {
        report = parse_machine(read_file(path));
    } catch (const ConfigError& e) {
        std::cerr << "malformed report: " << e.what() << "\n";
        return 2;
    }
    std::vector<std::string> problems;
    for (auto kind : kFaultKinds) {
        const auto& s = report.stats(kind);
        if (s.detected > s.injected) problems.push_back(std::string(to_string(kind)) + ": detected exceeds injected");
        if (s.detected == 0 && (s.mean_latency != 0.0 || s.max_latency != 0)) {
            problems.push_back(std::string(to_string(kind)) + ": latency without detections");
        }
        if (static_cast<double>(s.max_latency) < s.mean_latency) {
            problems.push_back(std::string(to_string(kind)) + ": mean latency above max");
        }
    }
    for (std::size_t r = 0; r < report.outcomes.size(); ++r) {
        const auto& o = report.outcomes[r];
        if ((o.status == ReplicaStatus::halted) != o.halt_kind.has_value()) {
            problems.push_back("replica " + std::to_string(r) + ": halt kind does not match status");
        }
    }
    if (report.decided > report.ops) problems.push_back("decided exceeds ops");
    for (const auto& p : problems) std::cerr << "invalid report: " << p << "\n";
    if (!problems.empty()) return 2;
    std::cout << render_table(report);
    std::cout << (report.clean() ? "clean" : "not clean") << "\n";
    return exit_code(report);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hardened multi-Paxos experiment runner"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run one fault-injection experiment");
    std::string config_path;
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> replicas;
    std::optional<std::uint64_t> ops;
    std::optional<std::string> transport;
    std::string out_path;
    run->add_option("--config", config_path, "Experiment configuration file")->required()->check(CLI::ExistingFile);
    run->add_option("--mode", mode, "Validation mode")->check(CLI::IsMember({"hardened", "baseline"}));
    run->add_option("--seed", seed, "Master seed");
    run->add_option("--replicas", replicas, "Cluster size");
    run->add_option("--ops", ops, "Workload length");
    run->add_option("--transport", transport, "Transport")->check(CLI::IsMember({"sim", "udp"}));
    run->add_option("--out", out_path, "Write the machine-readable report here");

    auto* replay = app.add_subcommand("replay-log", "Inspect a write-ahead log file");
    std::string log_path;
    replay->add_option("path", log_path, "Log file")->required()->check(CLI::ExistingFile);

    auto* verify = app.add_subcommand("verify-report", "Check a machine-readable report");
    std::string report_path;
    verify->add_option("path", report_path, "Report file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*replay) return replay_log(log_path);
        if (*verify) return verify_report(report_path);

        auto config = load_config(config_path);
        if (mode) config.mode = *mode == "baseline" ? Mode::baseline : Mode::hardened;
        if (seed) config.seed = *seed;
        if (replicas) config.replicas = *replicas;
        if (ops) config.ops = *ops;
        if (transport) config.transport = *transport == "udp" ? TransportKind::udp : TransportKind::sim;

        const auto report = run_experiment(config);
        std::cout << render_table(report);
        const auto machine = render_machine(report);
        if (out_path.empty()) {
            std::cout << "\n" << machine;
        } else {
            std::ofstream out(out_path, std::ios::binary);
            out << machine;
            if (!out) throw std::runtime_error("cannot write " + out_path);
        }
        return exit_code(report);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
