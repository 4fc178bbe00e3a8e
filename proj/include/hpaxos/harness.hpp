#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpaxos/detection.hpp"
#include "hpaxos/faultinject.hpp"
#include "hpaxos/list_app.hpp"
#include "hpaxos/paxos.hpp"
#include "hpaxos/replica.hpp"
#include "hpaxos/transport.hpp"

namespace hpaxos {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TransportKind : std::uint8_t { sim, udp };

struct ExperimentConfig {
    std::uint32_t replicas = 3;
    std::uint64_t ops = 1000;
    Mode mode = Mode::hardened;
    TransportKind transport = TransportKind::sim;
    /// Master seed; network, fault and workload seeds derive from it unless
    /// set explicitly.
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> net_seed;
    std::optional<std::uint64_t> fault_seed;

    NetConfig net;
    FaultConfig faults;
    PaxosTiming timing;

    /// Crash/restart events placed at random points of the workload.
    std::uint32_t crash_restarts = 0;
    std::uint64_t crash_downtime = 60;
    /// Read every running replica's state through get_state this often (0 off).
    std::uint64_t read_interval = 0;

    std::size_t client_window = 8;
    std::uint64_t client_retry = 150;
    std::uint64_t tick_budget = 400000;
    /// Give up after this many ticks without any replica applying anything.
    std::uint64_t stall_ticks = 4000;

    /// Log directory; empty keeps logs in memory.
    std::filesystem::path log_dir;
    bool fsync = false;
    /// host:port per replica, for the udp transport.
    std::vector<std::string> addresses;

    void validate() const;
};

/// Parses the flat key=value experiment file ('#' comments, blank lines ok).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct FaultStats {
    std::uint64_t injected = 0;
    std::uint64_t detected = 0;
    /// Mean applied transitions between injection and detection.
    double mean_latency = 0.0;
    /// Largest such latency; detections beyond one transition count as missed.
    std::uint64_t max_latency = 0;
    friend bool operator==(const FaultStats&, const FaultStats&) = default;
};

struct ReplicaOutcome {
    ReplicaStatus status = ReplicaStatus::running;
    std::optional<DetectionKind> halt_kind;
    std::uint64_t applied = 0;
    std::uint64_t checksum = 0;
    friend bool operator==(const ReplicaOutcome&, const ReplicaOutcome&) = default;
};

struct ExperimentReport {
    Mode mode = Mode::hardened;
    std::uint64_t seed = 0;
    std::uint32_t replicas = 0;
    std::uint64_t ops = 0;
    std::array<FaultStats, 4> faults{};
    std::vector<ReplicaOutcome> outcomes;
    bool divergence = false;
    bool lockup = false;
    /// Client operations applied on at least one replica.
    std::uint64_t decided = 0;
    std::uint64_t ticks = 0;
    std::uint64_t post_halt_sends = 0;
    /// Corrupted envelopes that reached a protocol handler.
    std::uint64_t corrupted_dispatches = 0;
    std::uint64_t restarts = 0;

    FaultStats& stats(FaultKind kind) { return faults[static_cast<std::size_t>(kind)]; }
    const FaultStats& stats(FaultKind kind) const { return faults[static_cast<std::size_t>(kind)]; }

    /// Every injection detected and no divergence among surviving replicas.
    bool clean() const;
    /// Nothing went wrong at all: no divergence, crash, halt or lock-up.
    bool all_clean() const;

    friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

/// Everything a run observed, for tests that need more than the report.
struct ExperimentTrace {
    std::vector<InjectionRecord> injections;
    std::vector<DetectionEvent> detections;
    /// Workload operation bytes; request id i + 1 carries workload[i].
    std::vector<Bytes> workload;
    /// Per replica, the request applied at each instance (nullopt for no-ops
    /// and duplicates).
    std::vector<std::map<InstanceId, std::optional<RequestId>>> applied_requests;
    /// Per replica, live applications per instance across incarnations.
    std::vector<std::map<InstanceId, std::uint32_t>> live_applications;
    /// Per replica, the checksum history at the end of the run.
    std::vector<std::vector<std::uint64_t>> checksums;
    std::vector<Bytes> final_states;
    /// After each restart: (replica, applied prefix, recovered encoded state).
    struct Recovery {
        ReplicaId replica = 0;
        InstanceId applied = 0;
        Bytes state;
        bool halted = false;
    };
    std::vector<Recovery> recoveries;
};

ExperimentReport run_experiment(const ExperimentConfig& config, ExperimentTrace* trace = nullptr);

/// Process exit status for a finished run: 0 if clean(), 1 otherwise.
int exit_code(const ExperimentReport& report);

/// Aligned human-readable table.
std::string render_table(const ExperimentReport& report);
/// One stable key=value line per metric.
std::string render_machine(const ExperimentReport& report);
/// Inverse of render_machine; throws ConfigError on malformed input.
ExperimentReport parse_machine(const std::string& text);

}  // namespace hpaxos
