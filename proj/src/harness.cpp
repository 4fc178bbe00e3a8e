#include "hpaxos/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

namespace hpaxos {
namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer
    std::uint64_t z = seed + salt * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto at = s.find(sep, start);
        parts.push_back(trim(s.substr(start, at - start)));
        if (at == std::string_view::npos) break;
        start = at + 1;
    }
    return parts;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end || value.empty()) throw ConfigError(key + ": expected unsigned integer");
    return out;
}

double parse_prob(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double p = std::stod(value, &used);
        if (used != value.size() || !(p >= 0.0 && p <= 1.0)) throw ConfigError(key + ": expected probability");
        return p;
    } catch (const std::logic_error&) {
        throw ConfigError(key + ": expected probability");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(key + ": expected boolean");
}

std::set<ReplicaId> parse_ids(const std::string& key, const std::string& value) {
    std::set<ReplicaId> ids;
    if (value.empty()) return ids;
    for (const auto& part : split(value, ',')) ids.insert(static_cast<ReplicaId>(parse_u64(key, part)));
    return ids;
}

// "start-end:0,1|2"
Partition parse_partition(const std::string& key, const std::string& value) {
    const auto colon = value.find(':');
    const auto dash = value.find('-');
    if (colon == std::string::npos || dash == std::string::npos || dash > colon) {
        throw ConfigError(key + ": expected start-end:ids|ids");
    }
    Partition p;
    p.start = parse_u64(key, trim(value.substr(0, dash)));
    p.end = parse_u64(key, trim(value.substr(dash + 1, colon - dash - 1)));
    for (const auto& group : split(value.substr(colon + 1), '|')) p.groups.push_back(parse_ids(key, group));
    return p;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (replicas < 1) throw ConfigError("replicas must be at least 1");
    if (client_window < 1) throw ConfigError("client_window must be at least 1");
    try {
        net.validate();
        faults.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (transport == TransportKind::udp && addresses.size() != replicas) {
        throw ConfigError("udp transport needs one address per replica");
    }
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;
    // Injection defaults when a config file does not say otherwise.
    c.faults.msg_corrupt_prob = 0.01;
    c.faults.state_corrupt_prob = 0.01;
    c.faults.transition_drop_prob = 0.01;
    c.faults.storage_corrupt_prob = 0.01;

    std::map<ReplicaId, std::string> addresses;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key=value");
        const auto key = trim(std::string_view(line).substr(0, eq));
        const auto value = trim(std::string_view(line).substr(eq + 1));

        if (key == "replicas") {
            c.replicas = static_cast<std::uint32_t>(parse_u64(key, value));
        } else if (key == "ops") {
            c.ops = parse_u64(key, value);
        } else if (key == "mode") {
            if (value == "hardened") {
                c.mode = Mode::hardened;
            } else if (value == "baseline") {
                c.mode = Mode::baseline;
            } else {
                throw ConfigError("mode: expected hardened or baseline");
            }
        } else if (key == "transport") {
            if (value == "sim") {
                c.transport = TransportKind::sim;
            } else if (value == "udp") {
                c.transport = TransportKind::udp;
            } else {
                throw ConfigError("transport: expected sim or udp");
            }
        } else if (key == "seed") {
            c.seed = parse_u64(key, value);
        } else if (key == "net_seed") {
            c.net_seed = parse_u64(key, value);
        } else if (key == "fault_seed") {
            c.fault_seed = parse_u64(key, value);
        } else if (key == "drop_prob") {
            c.net.drop_prob = parse_prob(key, value);
        } else if (key == "dup_prob") {
            c.net.dup_prob = parse_prob(key, value);
        } else if (key == "delay_min") {
            c.net.delay_min = parse_u64(key, value);
        } else if (key == "delay_max") {
            c.net.delay_max = parse_u64(key, value);
        } else if (key == "partition") {
            c.net.partitions.push_back(parse_partition(key, value));
        } else if (key == "msg_corrupt_prob") {
            c.faults.msg_corrupt_prob = parse_prob(key, value);
        } else if (key == "state_corrupt_prob") {
            c.faults.state_corrupt_prob = parse_prob(key, value);
        } else if (key == "transition_drop_prob") {
            c.faults.transition_drop_prob = parse_prob(key, value);
        } else if (key == "storage_corrupt_prob") {
            c.faults.storage_corrupt_prob = parse_prob(key, value);
        } else if (key == "fault_targets") {
            c.faults.targets = parse_ids(key, value);
        } else if (key == "heartbeat_interval") {
            c.timing.heartbeat_interval = parse_u64(key, value);
        } else if (key == "suspect_timeout") {
            c.timing.suspect_timeout = parse_u64(key, value);
        } else if (key == "retry_timeout") {
            c.timing.retry_timeout = parse_u64(key, value);
        } else if (key == "crash_restarts") {
            c.crash_restarts = static_cast<std::uint32_t>(parse_u64(key, value));
        } else if (key == "crash_downtime") {
            c.crash_downtime = parse_u64(key, value);
        } else if (key == "read_interval") {
            c.read_interval = parse_u64(key, value);
        } else if (key == "client_window") {
            c.client_window = parse_u64(key, value);
        } else if (key == "client_retry") {
            c.client_retry = parse_u64(key, value);
        } else if (key == "tick_budget") {
            c.tick_budget = parse_u64(key, value);
        } else if (key == "stall_ticks") {
            c.stall_ticks = parse_u64(key, value);
        } else if (key == "log_dir") {
            c.log_dir = value;
        } else if (key == "fsync") {
            c.fsync = parse_bool(key, value);
        } else if (key.starts_with("replica.") && key.ends_with(".addr")) {
            const auto id = key.substr(8, key.size() - 13);
            addresses[static_cast<ReplicaId>(parse_u64(key, id))] = value;
        } else {
            throw ConfigError("unknown key: " + key);
        }
    }
    for (const auto& [id, address] : addresses) {
        if (id != c.addresses.size()) throw ConfigError("replica addresses must be numbered 0..n-1");
        c.addresses.push_back(address);
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

bool ExperimentReport::clean() const {
    for (const auto& f : faults) {
        if (f.detected != f.injected) return false;
    }
    return !divergence;
}

bool ExperimentReport::all_clean() const {
    if (divergence || lockup) return false;
    return std::all_of(outcomes.begin(), outcomes.end(),
                       [](const ReplicaOutcome& o) { return o.status == ReplicaStatus::running; });
}

int exit_code(const ExperimentReport& report) { return report.clean() ? 0 : 1; }

namespace {

using ListReplica = Replica<ListApp>;

class Experiment {
public:
    Experiment(const ExperimentConfig& config, ExperimentTrace& trace)
        : config_(config),
          n_(config.replicas),
          trace_(trace),
          injector_(fault_config(config)),
          control_(mix(config.seed, 4)),
          replicas_(n_),
          devices_(n_),
          down_until_(n_),
          halted_(n_, false),
          cursor_(n_, 0) {
        trace_ = ExperimentTrace{};
        trace_.applied_requests.resize(n_);
        trace_.live_applications.resize(n_);

        Rng workload(mix(config.seed, 3));
        for (std::uint64_t i = 0; i < config.ops; ++i) trace_.workload.push_back(ListApp::encode_op(ListApp::random_op(workload)));

        if (config.transport == TransportKind::sim) {
            auto net = config.net;
            net.seed = config.net_seed.value_or(mix(config.seed, 1));
            auto sim = std::make_unique<SimNetwork>(net, n_);
            sim_ = sim.get();
            transport_ = std::move(sim);
        } else {
            std::set<ReplicaId> local;
            for (ReplicaId r = 0; r < n_; ++r) local.insert(r);
            transport_ = std::make_unique<UdpTransport>(config.addresses, local);
        }

        for (ReplicaId r = 0; r < n_; ++r) {
            if (config.log_dir.empty()) {
                devices_[r] = std::make_shared<MemoryLogDevice>();
            } else {
                const auto path = config.log_dir / (std::to_string(r) + ".log");
                std::filesystem::create_directories(config.log_dir);
                std::filesystem::remove(path);
                devices_[r] = std::make_shared<FileLogDevice>(path, config.fsync);
            }
        }

        if (config.crash_restarts > 0 && config.ops > 1) {
            for (std::uint32_t i = 0; i < config.crash_restarts; ++i) crash_points_.push_back(control_.between(1, config.ops - 1));
            std::sort(crash_points_.begin(), crash_points_.end());
        }
    }

    ExperimentReport run() {
        for (ReplicaId r = 0; r < n_; ++r) start(r, 0);

        std::uint64_t now = 0;
        std::uint64_t last_progress_at = 0;
        std::uint64_t last_progress = progress();
        bool finished = false;
        while (now < config_.tick_budget) {
            ++now;
            if (config_.transport == TransportKind::udp) std::this_thread::sleep_for(std::chrono::milliseconds(1));
            now_ = now;

            for (auto& d : transport_->poll(now)) {
                if (d.to < n_ && replicas_[d.to]) replicas_[d.to]->receive(d.wire, now);
            }
            for (ReplicaId r = 0; r < n_; ++r) {
                if (replicas_[r]) replicas_[r]->tick(now);
            }
            client_step(now);
            crash_step(now);
            if (config_.read_interval != 0 && now % config_.read_interval == 0) read_all();

            if (finished_workload()) {
                finished = true;
                break;
            }
            const auto p = progress();
            if (p != last_progress) {
                last_progress = p;
                last_progress_at = now;
            } else if (now - last_progress_at >= config_.stall_ticks) {
                break;
            }
        }
        read_all();
        return report(now, !finished);
    }

private:
    static FaultConfig fault_config(const ExperimentConfig& config) {
        auto faults = config.faults;
        faults.seed = config.fault_seed.value_or(mix(config.seed, 2));
        return faults;
    }

    void start(ReplicaId r, std::uint64_t now) {
        ReplicaConfig rc;
        rc.id = r;
        rc.cluster_size = n_;
        rc.mode = config_.mode;
        rc.timing = config_.timing;
        if (config_.transport == TransportKind::udp) rc.max_value_size = kMaxDatagram - kEnvelopeOverhead - 64;

        auto hooks = injector_.hooks<ListApp::State>();
        auto corrupt = hooks.on_receive;
        hooks.on_receive = [this, corrupt](ReplicaId id, std::uint64_t ref, Bytes wire) {
            const auto before = injector_.records().size();
            auto out = corrupt(id, ref, std::move(wire));
            if (injector_.records().size() != before) corrupted_.insert({id, ref});
            return out;
        };
        hooks.on_dispatch = [this](ReplicaId id, std::uint64_t ref, const Payload&) {
            if (corrupted_.contains({id, ref})) ++corrupted_dispatches_;
        };
        hooks.on_apply = [this](ReplicaId id, InstanceId seq, std::optional<RequestId> request, bool live) {
            trace_.applied_requests[id][seq] = request;
            if (live) ++trace_.live_applications[id][seq];
        };

        auto sink = [this](const DetectionEvent& event) {
            trace_.detections.push_back(event);
            if (event.kind != DetectionKind::message_corruption) halted_[event.replica] = true;
        };
        auto outbox = [this](ReplicaId from, ReplicaId to, const Bytes& wire) {
            if (halted_[from]) ++post_halt_sends_;
            try {
                transport_->send(from, to, wire);
            } catch (const SendError&) {
                // oversize datagram: lost like any other datagram
            }
        };
        replicas_[r] = std::make_unique<ListReplica>(rc, ListApp{}, devices_[r], sink, outbox, std::move(hooks), now);
    }

    std::optional<ReplicaId> submit_target() const {
        for (ReplicaId r = 0; r < n_; ++r) {
            if (replicas_[r] && replicas_[r]->running()) return r;
        }
        return std::nullopt;
    }

    bool applied_anywhere(RequestId request) const {
        for (const auto& replica : replicas_) {
            if (replica && replica->has_applied(request)) return true;
        }
        return false;
    }

    void submit(ReplicaId target, RequestId request, std::uint64_t now) {
        try {
            replicas_[target]->submit(request, trace_.workload[request - 1], now);
        } catch (const Halted&) {
        }
        outstanding_[request] = now;
    }

    void client_step(std::uint64_t now) {
        for (auto it = outstanding_.begin(); it != outstanding_.end();) {
            if (applied_anywhere(it->first)) {
                ++completed_;
                it = outstanding_.erase(it);
            } else {
                ++it;
            }
        }
        const auto target = submit_target();
        if (!target) return;
        while (outstanding_.size() < config_.client_window && next_request_ <= config_.ops) {
            submit(*target, next_request_++, now);
        }
        for (auto& [request, sent] : outstanding_) {
            if (now - sent >= config_.client_retry) submit(*target, request, now);
        }
    }

    void crash_step(std::uint64_t now) {
        for (ReplicaId r = 0; r < n_; ++r) {
            if (down_until_[r] && now >= *down_until_[r]) {
                down_until_[r].reset();
                restart(r, now);
            }
        }
        const bool someone_down = std::any_of(down_until_.begin(), down_until_.end(), [](const auto& d) { return d.has_value(); });
        if (someone_down || next_crash_ >= crash_points_.size() || completed_ < crash_points_[next_crash_]) return;
        ++next_crash_;
        std::vector<ReplicaId> candidates;
        for (ReplicaId r = 0; r < n_; ++r) {
            if (replicas_[r] && replicas_[r]->running()) candidates.push_back(r);
        }
        if (candidates.empty()) return;
        const auto victim = candidates[control_.below(candidates.size())];
        devices_[victim]->drop_unsynced();
        replicas_[victim].reset();
        down_until_[victim] = now + config_.crash_downtime;
    }

    void restart(ReplicaId r, std::uint64_t now) {
        ++restarts_;
        injector_.set_storage_ref(restarts_);
        const auto before = injector_.records().size();
        start(r, now);
        bool injected = false;
        for (auto i = before; i < injector_.records().size(); ++i) {
            injected |= injector_.records()[i].kind == FaultKind::storage;
        }
        const auto& replica = *replicas_[r];
        if (injected && replica.status() == ReplicaStatus::halted &&
            replica.halt_event()->kind == DetectionKind::storage_corruption) {
            storage_detected_.insert(restarts_);
        }
        trace_.recoveries.push_back(ExperimentTrace::Recovery{r, replica.applied(), replica.encoded_state(),
                                                              replica.status() != ReplicaStatus::running});
    }

    void read_all() {
        for (auto& replica : replicas_) {
            if (!replica || !replica->running()) continue;
            try {
                (void)replica->get_state();
            } catch (const Halted&) {
            }
        }
    }

    std::uint64_t progress() const {
        std::uint64_t total = completed_;
        for (const auto& replica : replicas_) {
            if (replica) total += replica->applied();
        }
        return total;
    }

    bool finished_workload() {
        if (next_request_ <= config_.ops || !outstanding_.empty()) return false;
        for (ReplicaId r = 0; r < n_; ++r) {
            if (down_until_[r]) return false;
            const auto& replica = replicas_[r];
            if (!replica || !replica->running()) continue;
            while (cursor_[r] < config_.ops && replica->has_applied(cursor_[r] + 1)) ++cursor_[r];
            if (cursor_[r] < config_.ops) return false;
        }
        return true;
    }

    std::optional<DetectionEvent> halting_event(ReplicaId r) const {
        for (const auto& e : trace_.detections) {
            if (e.replica == r && e.kind != DetectionKind::message_corruption) return e;
        }
        return std::nullopt;
    }

    ExperimentReport report(std::uint64_t ticks, bool lockup) {
        ExperimentReport rep;
        rep.mode = config_.mode;
        rep.seed = config_.seed;
        rep.replicas = n_;
        rep.ops = config_.ops;
        rep.ticks = ticks;
        rep.lockup = lockup;
        rep.post_halt_sends = post_halt_sends_;
        rep.corrupted_dispatches = corrupted_dispatches_;
        rep.restarts = restarts_;
        rep.decided = completed_;
        for (const auto& [request, sent] : outstanding_) {
            if (applied_anywhere(request)) ++rep.decided;
        }

        std::set<std::pair<ReplicaId, std::uint64_t>> message_detections;
        for (const auto& e : trace_.detections) {
            if (e.kind == DetectionKind::message_corruption) message_detections.insert({e.replica, e.ref});
        }
        std::array<std::uint64_t, 4> latency_sum{};
        for (const auto& rec : injector_.records()) {
            auto& stats = rep.stats(rec.kind);
            ++stats.injected;
            std::optional<std::uint64_t> latency;
            const auto halt = halting_event(rec.replica);
            switch (rec.kind) {
                case FaultKind::message:
                    if (message_detections.contains({rec.replica, rec.ref})) latency = 0;
                    break;
                case FaultKind::state:
                    if (halt && halt->kind == DetectionKind::state_divergence && halt->seq && rec.seq &&
                        *halt->seq >= *rec.seq && *halt->seq - *rec.seq <= 1) {
                        latency = *halt->seq - *rec.seq;
                    }
                    break;
                case FaultKind::transition:
                    if (halt && halt->seq == rec.seq &&
                        (halt->kind == DetectionKind::state_divergence || halt->kind == DetectionKind::semantic_failure)) {
                        latency = 0;
                    }
                    break;
                case FaultKind::storage:
                    if (storage_detected_.contains(rec.ref)) latency = 0;
                    break;
            }
            if (latency) {
                ++stats.detected;
                latency_sum[static_cast<std::size_t>(rec.kind)] += *latency;
                stats.max_latency = std::max(stats.max_latency, *latency);
            }
        }
        for (auto kind : kFaultKinds) {
            auto& stats = rep.stats(kind);
            if (stats.detected != 0) {
                stats.mean_latency = static_cast<double>(latency_sum[static_cast<std::size_t>(kind)]) / static_cast<double>(stats.detected);
            }
        }

        std::vector<ReplicaId> survivors;
        for (ReplicaId r = 0; r < n_; ++r) {
            ReplicaOutcome o;
            const auto& replica = replicas_[r];
            if (!replica) {
                o.status = ReplicaStatus::crashed;
            } else {
                o.status = replica->status();
                if (replica->halt_event()) o.halt_kind = replica->halt_event()->kind;
                o.applied = replica->applied();
                o.checksum = replica->rolling_checksum();
                if (replica->running()) survivors.push_back(r);
                trace_.checksums.push_back(replica->checksums());
                trace_.final_states.push_back(replica->encoded_state());
            }
            if (!replica) {
                trace_.checksums.emplace_back();
                trace_.final_states.emplace_back();
            }
            rep.outcomes.push_back(o);
        }
        for (std::size_t i = 0; i < survivors.size(); ++i) {
            for (std::size_t j = i + 1; j < survivors.size(); ++j) {
                const auto& a = *replicas_[survivors[i]];
                const auto& b = *replicas_[survivors[j]];
                const auto common = std::min(a.applied(), b.applied());
                if (common > 0 && a.checksums()[common - 1] != b.checksums()[common - 1]) rep.divergence = true;
                if (a.applied() == b.applied() && a.encoded_state() != b.encoded_state()) rep.divergence = true;
            }
        }
        trace_.injections = injector_.records();
        return rep;
    }

    const ExperimentConfig& config_;
    std::uint32_t n_;
    ExperimentTrace& trace_;
    FaultInjector injector_;
    Rng control_;
    std::unique_ptr<Transport> transport_;
    SimNetwork* sim_ = nullptr;
    std::vector<std::unique_ptr<ListReplica>> replicas_;
    std::vector<std::shared_ptr<LogDevice>> devices_;
    std::vector<std::optional<std::uint64_t>> down_until_;
    std::vector<bool> halted_;
    std::vector<std::uint64_t> cursor_;

    std::uint64_t now_ = 0;
    RequestId next_request_ = 1;
    std::map<RequestId, std::uint64_t> outstanding_;
    std::uint64_t completed_ = 0;
    std::vector<std::uint64_t> crash_points_;
    std::size_t next_crash_ = 0;
    std::uint64_t restarts_ = 0;
    std::set<std::uint64_t> storage_detected_;
    std::set<std::pair<ReplicaId, std::uint64_t>> corrupted_;
    std::uint64_t corrupted_dispatches_ = 0;
    std::uint64_t post_halt_sends_ = 0;
};

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, ExperimentTrace* trace) {
    config.validate();
    ExperimentTrace scratch;
    Experiment experiment(config, trace != nullptr ? *trace : scratch);
    return experiment.run();
}

namespace {

std::string fixed(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6) << v;
    return out.str();
}

std::string hex(std::uint64_t v) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << v;
    return out.str();
}

}  // namespace

std::string render_table(const ExperimentReport& report) {
    std::ostringstream out;
    out << "mode " << to_string(report.mode) << ", seed " << report.seed << ", " << report.replicas
        << " replicas, " << report.ops << " ops\n\n";
    out << std::left << std::setw(12) << "fault" << std::right << std::setw(10) << "injected" << std::setw(10)
        << "detected" << std::setw(14) << "mean latency" << std::setw(13) << "max latency" << "\n";
    for (auto kind : kFaultKinds) {
        const auto& s = report.stats(kind);
        out << std::left << std::setw(12) << to_string(kind) << std::right << std::setw(10) << s.injected
            << std::setw(10) << s.detected << std::setw(14) << fixed(s.mean_latency) << std::setw(13)
            << s.max_latency << "\n";
    }
    out << "\n"
        << std::left << std::setw(10) << "replica" << std::setw(10) << "status" << std::setw(22) << "halt"
        << std::right << std::setw(10) << "applied" << std::setw(18) << "checksum" << "\n";
    for (std::size_t r = 0; r < report.outcomes.size(); ++r) {
        const auto& o = report.outcomes[r];
        out << std::left << std::setw(10) << r << std::setw(10) << to_string(o.status) << std::setw(22)
            << (o.halt_kind ? std::string(to_string(*o.halt_kind)) : std::string("-")) << std::right
            << std::setw(10) << o.applied << std::setw(18) << hex(o.checksum) << "\n";
    }
    out << "\ndecided " << report.decided << "/" << report.ops << ", divergence " << (report.divergence ? "yes" : "no")
        << ", lockup " << (report.lockup ? "yes" : "no") << ", restarts " << report.restarts
        << ", post-halt sends " << report.post_halt_sends << ", corrupted dispatches "
        << report.corrupted_dispatches << ", ticks " << report.ticks << "\n";
    return out.str();
}

std::string render_machine(const ExperimentReport& report) {
    std::ostringstream out;
    out << "mode=" << to_string(report.mode) << "\n";
    out << "seed=" << report.seed << "\n";
    out << "replicas=" << report.replicas << "\n";
    out << "ops=" << report.ops << "\n";
    for (auto kind : kFaultKinds) {
        const auto& s = report.stats(kind);
        const auto prefix = "fault." + std::string(to_string(kind)) + ".";
        out << prefix << "injected=" << s.injected << "\n";
        out << prefix << "detected=" << s.detected << "\n";
        out << prefix << "mean_latency=" << fixed(s.mean_latency) << "\n";
        out << prefix << "max_latency=" << s.max_latency << "\n";
    }
    for (std::size_t r = 0; r < report.outcomes.size(); ++r) {
        const auto& o = report.outcomes[r];
        const auto prefix = "replica." + std::to_string(r) + ".";
        out << prefix << "status=" << to_string(o.status) << "\n";
        out << prefix << "halt=" << (o.halt_kind ? std::string(to_string(*o.halt_kind)) : std::string("-")) << "\n";
        out << prefix << "applied=" << o.applied << "\n";
        out << prefix << "checksum=" << hex(o.checksum) << "\n";
    }
    out << "divergence=" << (report.divergence ? 1 : 0) << "\n";
    out << "lockup=" << (report.lockup ? 1 : 0) << "\n";
    out << "decided=" << report.decided << "\n";
    out << "restarts=" << report.restarts << "\n";
    out << "post_halt_sends=" << report.post_halt_sends << "\n";
    out << "corrupted_dispatches=" << report.corrupted_dispatches << "\n";
    out << "ticks=" << report.ticks << "\n";
    return out.str();
}

ExperimentReport parse_machine(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("report line without '=': " + line);
        if (!kv.emplace(line.substr(0, eq), line.substr(eq + 1)).second) {
            throw ConfigError("duplicate report key: " + line.substr(0, eq));
        }
    }
    auto take = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError("report missing key: " + key);
        auto value = it->second;
        kv.erase(it);
        return value;
    };
    auto flag = [&](const std::string& key) {
        const auto v = take(key);
        if (v != "0" && v != "1") throw ConfigError(key + ": expected 0 or 1");
        return v == "1";
    };

    ExperimentReport rep;
    const auto mode = take("mode");
    if (mode == "hardened") {
        rep.mode = Mode::hardened;
    } else if (mode == "baseline") {
        rep.mode = Mode::baseline;
    } else {
        throw ConfigError("mode: unknown value " + mode);
    }
    rep.seed = parse_u64("seed", take("seed"));
    rep.replicas = static_cast<std::uint32_t>(parse_u64("replicas", take("replicas")));
    rep.ops = parse_u64("ops", take("ops"));
    for (auto kind : kFaultKinds) {
        auto& s = rep.stats(kind);
        const auto prefix = "fault." + std::string(to_string(kind)) + ".";
        s.injected = parse_u64(prefix + "injected", take(prefix + "injected"));
        s.detected = parse_u64(prefix + "detected", take(prefix + "detected"));
        try {
            s.mean_latency = std::stod(take(prefix + "mean_latency"));
        } catch (const std::logic_error&) {
            throw ConfigError(prefix + "mean_latency: expected number");
        }
        s.max_latency = parse_u64(prefix + "max_latency", take(prefix + "max_latency"));
    }
    for (std::uint32_t r = 0; r < rep.replicas; ++r) {
        ReplicaOutcome o;
        const auto prefix = "replica." + std::to_string(r) + ".";
        const auto status = take(prefix + "status");
        if (status == "running") {
            o.status = ReplicaStatus::running;
        } else if (status == "halted") {
            o.status = ReplicaStatus::halted;
        } else if (status == "crashed") {
            o.status = ReplicaStatus::crashed;
        } else {
            throw ConfigError(prefix + "status: unknown value " + status);
        }
        const auto halt = take(prefix + "halt");
        if (halt != "-") {
            o.halt_kind = parse_detection_kind(halt);
            if (!o.halt_kind) throw ConfigError(prefix + "halt: unknown kind " + halt);
        }
        o.applied = parse_u64(prefix + "applied", take(prefix + "applied"));
        const auto checksum = take(prefix + "checksum");
        auto [ptr, ec] = std::from_chars(checksum.data(), checksum.data() + checksum.size(), o.checksum, 16);
        if (ec != std::errc{} || ptr != checksum.data() + checksum.size()) {
            throw ConfigError(prefix + "checksum: expected hex");
        }
        rep.outcomes.push_back(o);
    }
    rep.divergence = flag("divergence");
    rep.lockup = flag("lockup");
    rep.decided = parse_u64("decided", take("decided"));
    rep.restarts = parse_u64("restarts", take("restarts"));
    rep.post_halt_sends = parse_u64("post_halt_sends", take("post_halt_sends"));
    rep.corrupted_dispatches = parse_u64("corrupted_dispatches", take("corrupted_dispatches"));
    rep.ticks = parse_u64("ticks", take("ticks"));
    if (!kv.empty()) throw ConfigError("unknown report key: " + kv.begin()->first);
    return rep;
}

}  // namespace hpaxos
