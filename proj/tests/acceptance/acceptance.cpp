// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "generators.hpp"
#include "hpaxos/digest.hpp"
#include "hpaxos/harness.hpp"
#include "hpaxos/storage.hpp"
#include "model_check.hpp"

using namespace hpaxos;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream note;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            note.str("");
            note << what;
        }
    }
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

ExperimentConfig base(std::uint64_t seed, std::uint64_t ops = 1000) {
    ExperimentConfig c;
    c.seed = seed;
    c.ops = ops;
    return c;
}

// Replays the workload requests applied at instances [0, upto) of one replica.
Bytes fresh_state(const ExperimentTrace& trace, const std::map<InstanceId, std::optional<RequestId>>& applied,
                  InstanceId upto) {
    ListApp app;
    ListApp::State s;
    for (InstanceId i = 0; i < upto; ++i) {
        const auto& request = applied.at(i);
        if (request) app.execute(s, trace.workload.at(*request - 1));
    }
    return app.encode_state(s);
}

// Pairwise order agreement, validity and integrity over a finished trace.
std::string ordering_violation(const ExperimentTrace& trace, std::uint64_t ops) {
    const auto n = trace.applied_requests.size();
    for (std::size_t a = 0; a < n; ++a) {
        std::set<RequestId> once;
        for (const auto& [seq, request] : trace.applied_requests[a]) {
            if (request && (*request == 0 || *request > ops)) return "replica applied an unknown request";
            if (request && !once.insert(*request).second) return "request applied twice on one replica";
        }
        for (const auto& [seq, count] : trace.live_applications[a]) {
            if (count != 1) return "instance " + std::to_string(seq) + " applied " + std::to_string(count) + " times";
        }
        for (std::size_t b = a + 1; b < n; ++b) {
            for (const auto& [seq, request] : trace.applied_requests[a]) {
                auto other = trace.applied_requests[b].find(seq);
                if (other != trace.applied_requests[b].end() && other->second != request) {
                    return "replicas " + std::to_string(a) + "/" + std::to_string(b) + " disagree at instance " +
                           std::to_string(seq);
                }
            }
            const auto& ca = trace.checksums[a];
            const auto& cb = trace.checksums[b];
            for (std::size_t i = 0; i < std::min(ca.size(), cb.size()); ++i) {
                if (ca[i] != cb[i]) return "checksums differ at instance " + std::to_string(i);
            }
        }
    }
    return {};
}

Outcome ac1() {
    Outcome o;
    const auto start = Clock::now();
    ExperimentTrace trace;
    const auto report = run_experiment(base(1), &trace);
    const auto seconds = since(start);
    o.require(report.decided == 1000, "not all 1000 ops decided");
    o.require(report.all_clean(), "run not clean");
    o.require(trace.injections.empty(), "injections with probabilities 0");
    std::vector<std::optional<RequestId>> reference;
    for (const auto& [seq, request] : trace.applied_requests[0]) reference.push_back(request);
    std::size_t ops_delivered = 0;
    for (const auto& r : reference) ops_delivered += r.has_value();
    o.require(ops_delivered == 1000, "replica 0 did not deliver 1000 operations");
    for (std::size_t r = 1; r < trace.applied_requests.size(); ++r) {
        std::vector<std::optional<RequestId>> seq;
        for (const auto& [i, request] : trace.applied_requests[r]) seq.push_back(request);
        o.require(seq == reference, "delivered sequences differ");
        o.require(trace.checksums[r] == trace.checksums[0], "rolling checksums differ");
    }
    o.require(seconds < 5.0, "slower than 5 s");
    if (o.pass) {
        o.note << "3 replicas delivered identical 1000-op sequences over " << trace.checksums[0].size()
               << " instances, checksums equal at every seq, " << seconds << " s";
    }
    return o;
}

Outcome ac2() {
    Outcome o;
    double worst = 0;
    std::uint64_t partitions = 0;
    for (std::uint64_t seed = 1; seed <= 100 && o.pass; ++seed) {
        Rng pick(seed * 7919);
        auto config = base(seed);
        config.faults = FaultConfig{};
        config.net.drop_prob = pick.unit() * 0.3;
        config.net.dup_prob = pick.unit() * 0.2;
        config.net.delay_min = 1;
        config.net.delay_max = pick.between(1, 10);
        config.crash_restarts = 1;
        if (seed % 4 == 0) {
            // Isolate one replica for a while; the majority side keeps going.
            const auto start = pick.between(50, 600);
            std::set<ReplicaId> majority{0, 1, 2};
            const auto lone = static_cast<ReplicaId>(pick.below(3));
            majority.erase(lone);
            config.net.partitions.push_back(Partition{start, start + pick.between(50, 300), {majority, {lone}}});
            ++partitions;
        }
        const auto begin = Clock::now();
        ExperimentTrace trace;
        const auto report = run_experiment(config, &trace);
        const auto seconds = since(begin);
        worst = std::max(worst, seconds);
        const auto violation = ordering_violation(trace, config.ops);
        o.require(violation.empty(), "seed " + std::to_string(seed) + ": " + violation);
        o.require(!report.divergence, "seed " + std::to_string(seed) + ": divergence");
        o.require(report.decided == config.ops, "seed " + std::to_string(seed) + ": only " +
                                                     std::to_string(report.decided) + " ops decided");
        o.require(seconds < 5.0, "seed " + std::to_string(seed) + " took " + std::to_string(seconds) + " s");
    }
    if (o.pass) {
        o.note << "100 seeds (drop<=30%, dup<=20%, delay 1-10, 1 crash/restart, " << partitions
               << " with a partition): no agreement/order violations, all ops decided, slowest seed " << worst
               << " s";
    }
    return o;
}

Outcome ac3() {
    Outcome o;
    const auto start = Clock::now();
    struct Run {
        const char* label;
        acceptance::ModelCheckLimits limits;
    };
    auto bound = [](std::uint32_t depth, std::uint32_t drops, std::uint32_t dups, std::uint32_t timeouts) {
        acceptance::ModelCheckLimits l;
        l.max_depth = depth;
        l.drops = drops;
        l.duplicates = dups;
        l.timeouts = timeouts;
        return l;
    };
    const std::vector<Run> runs{{"reliable", bound(11, 0, 0, 0)},
                                {"re-lead", bound(9, 0, 0, 1)},
                                {"drop+dup", bound(8, 1, 1, 0)},
                                {"drop+dup+re-lead", bound(7, 1, 1, 1)}};
    std::ostringstream detail;
    for (const auto& run : runs) {
        const auto r = acceptance::model_check(run.limits);
        o.require(!r.violation, std::string(run.label) + ": " + r.detail);
        o.require(r.exhausted, std::string(run.label) + ": state cap reached");
        o.require(r.decided_states > 0, std::string(run.label) + ": no decision reachable within the bound");
        detail << run.label << " depth " << run.limits.max_depth << ": " << r.states << " states, "
               << r.decided_states << " with decisions; ";
    }
    const auto seconds = since(start);
    o.require(seconds < 60.0, "slower than 60 s");
    if (o.pass) o.note << detail.str() << "no instance decided two values, " << seconds << " s";
    return o;
}

ExperimentConfig ac4_config(std::uint64_t seed) {
    auto c = base(seed);
    c.faults = FaultConfig{};
    c.faults.msg_corrupt_prob = 0.05;
    return c;
}

ExperimentConfig ac5_config(std::uint64_t seed) {
    auto c = base(seed);
    c.faults = FaultConfig{};
    c.faults.state_corrupt_prob = 0.01;
    c.faults.transition_drop_prob = 0.01;
    if (seed % 2 == 0) c.read_interval = 7;
    return c;
}

constexpr std::uint64_t kCampaignSeeds = 10;

Outcome ac4() {
    Outcome o;
    std::uint64_t injected = 0;
    for (std::uint64_t seed = 1; seed <= kCampaignSeeds && o.pass; ++seed) {
        const auto report = run_experiment(ac4_config(seed));
        const auto& s = report.stats(FaultKind::message);
        injected += s.injected;
        const auto tag = "seed " + std::to_string(seed) + ": ";
        o.require(s.injected > 0, tag + "nothing injected");
        o.require(s.detected == s.injected, tag + std::to_string(s.detected) + "/" + std::to_string(s.injected) +
                                                " detected");
        o.require(report.corrupted_dispatches == 0, tag + "corrupted envelope reached a handler");
        o.require(!report.divergence, tag + "surviving replicas diverged");
    }
    if (o.pass) {
        o.note << kCampaignSeeds << " runs, " << injected
               << " corrupted envelopes, all detected and dropped before dispatch, no divergence";
    }
    return o;
}

Outcome ac5() {
    Outcome o;
    std::uint64_t state = 0, transition = 0, max_latency = 0;
    for (std::uint64_t seed = 1; seed <= kCampaignSeeds && o.pass; ++seed) {
        ExperimentTrace trace;
        const auto report = run_experiment(ac5_config(seed), &trace);
        const auto tag = "seed " + std::to_string(seed) + ": ";
        for (auto kind : {FaultKind::state, FaultKind::transition}) {
            const auto& s = report.stats(kind);
            o.require(s.detected == s.injected, tag + std::string(to_string(kind)) + " " +
                                                    std::to_string(s.detected) + "/" + std::to_string(s.injected));
            o.require(s.max_latency <= 1, tag + "detection later than one transition");
            max_latency = std::max(max_latency, s.max_latency);
        }
        state += report.stats(FaultKind::state).injected;
        transition += report.stats(FaultKind::transition).injected;
        for (const auto& rec : trace.injections) {
            o.require(report.outcomes[rec.replica].status == ReplicaStatus::halted,
                      tag + "affected replica still running");
        }
        o.require(report.post_halt_sends == 0, tag + std::to_string(report.post_halt_sends) + " post-halt sends");
    }
    o.require(state > 0 && transition > 0, "campaign injected nothing of one kind");
    if (o.pass) {
        o.note << kCampaignSeeds << " runs, " << state << " state + " << transition
               << " transition injections, all matched within " << max_latency
               << " transition(s), affected replicas halted, 0 post-halt sends";
    }
    return o;
}

Outcome ac6() {
    Outcome o;
    const auto start = Clock::now();
    const std::vector<Payload> records{Payload{0, 1, Accepted{Ballot{1, 0}, encode_command(1, to_bytes("alpha"))}},
                                       Payload{0, 1, Decision{encode_command(1, to_bytes("alpha"))}},
                                       Payload{0, 1, Applied{0x1234}}};
    Bytes log;
    std::vector<std::size_t> bounds{0};
    for (const auto& p : records) {
        const auto w = seal(p).wire();
        log.insert(log.end(), w.begin(), w.end());
        bounds.push_back(log.size());
    }
    const auto last_start = bounds[2];
    std::uint64_t flips = 0, halted = 0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        for (int v = 0; v < 256; ++v) {
            if (v == log[i]) continue;
            auto bad = log;
            bad[i] = static_cast<std::uint8_t>(v);
            ++flips;
            try {
                const auto r = parse_log(bad);
                // Only a flip inside the final record may read as a torn tail.
                o.require(i >= last_start, "flip at offset " + std::to_string(i) + " accepted");
                o.require(r.torn_tail && r.payloads.size() == 2, "trailing flip not cut as torn tail");
            } catch (const StorageCorruption&) {
                ++halted;
            }
        }
    }
    // A replica opening any non-trailing flipped log halts.
    std::uint64_t replica_halts = 0;
    for (std::size_t i = 0; i < last_start; ++i) {
        auto device = std::make_shared<MemoryLogDevice>();
        device->durable_mut() = log;
        device->durable_mut()[i] ^= 0x5a;
        ReplicaConfig config;
        config.id = 1;
        config.cluster_size = 3;
        Replica<ListApp> replica(config, ListApp{}, device, {}, {});
        if (replica.status() == ReplicaStatus::halted &&
            replica.halt_event()->kind == DetectionKind::storage_corruption) {
            ++replica_halts;
        }
    }
    o.require(replica_halts == last_start, "replica restart accepted a corrupted log");
    for (std::size_t cut = 0; cut <= log.size(); ++cut) {
        const auto r = parse_log(ByteView(log.data(), cut));
        std::size_t whole = 0;
        while (whole + 1 < bounds.size() && bounds[whole + 1] <= cut) ++whole;
        o.require(r.payloads.size() == whole && std::equal(r.payloads.begin(), r.payloads.end(), records.begin()),
                  "truncation at " + std::to_string(cut) + " did not recover the prefix");
    }
    const auto seconds = since(start);
    o.require(seconds < 30.0, "slower than 30 s");
    if (o.pass) {
        o.note << flips << " single-byte flips over a " << log.size() << "-byte 3-record log: every non-trailing flip "
               << "halts (" << halted << " StorageCorruption), " << replica_halts << "/" << last_start
               << " replica restarts halted, " << log.size() + 1 << " truncations recover the prefix, " << seconds
               << " s";
    }
    return o;
}

Outcome ac7() {
    Outcome o;
    int ac4_unclean = 0, ac5_unclean = 0;
    for (std::uint64_t seed = 1; seed <= kCampaignSeeds; ++seed) {
        auto c4 = ac4_config(seed);
        c4.mode = Mode::baseline;
        ac4_unclean += !run_experiment(c4).all_clean();
        auto c5 = ac5_config(seed);
        c5.mode = Mode::baseline;
        ac5_unclean += !run_experiment(c5).all_clean();
    }
    o.require(ac4_unclean > 0, "message campaign: every baseline run clean");
    o.require(ac5_unclean > 0, "state/transition campaign: every baseline run clean");
    if (o.pass) {
        o.note << "baseline runs not all-clean: message campaign " << ac4_unclean << "/" << kCampaignSeeds
               << ", state/transition campaign " << ac5_unclean << "/" << kCampaignSeeds;
    }
    return o;
}

Outcome ac8() {
    Outcome o;
    auto config = base(8);
    config.faults = FaultConfig{};
    config.crash_restarts = 20;
    ExperimentTrace trace;
    const auto report = run_experiment(config, &trace);
    o.require(report.restarts == 20, "only " + std::to_string(report.restarts) + " restarts happened");
    o.require(report.decided == 1000, "workload did not finish");
    o.require(!report.divergence, "divergence");
    // Reference order: the longest surviving applied sequence.
    std::size_t longest = 0;
    for (std::size_t r = 1; r < trace.applied_requests.size(); ++r) {
        if (trace.applied_requests[r].size() > trace.applied_requests[longest].size()) longest = r;
    }
    const auto& reference = trace.applied_requests[longest];
    std::size_t compared = 0;
    for (const auto& rec : trace.recoveries) {
        o.require(!rec.halted, "restarted replica halted");
        if (rec.applied > reference.size()) continue;
        o.require(rec.state == fresh_state(trace, reference, rec.applied),
                  "recovered state differs from a fresh replay at prefix " + std::to_string(rec.applied));
        ++compared;
    }
    o.require(compared == trace.recoveries.size(), "recovery beyond the reference prefix");
    const auto violation = ordering_violation(trace, config.ops);
    o.require(violation.empty(), violation);
    if (o.pass) {
        o.note << "20 crash/restarts: " << compared
               << " recovered states byte-equal to fresh replays, every instance applied once per replica";
    }
    return o;
}

Outcome ac9() {
    Outcome o;
    std::vector<ExperimentConfig> configs{base(1), ac4_config(3), ac5_config(4)};
    auto mixed = base(99, 500);
    mixed.net.drop_prob = 0.1;
    mixed.net.dup_prob = 0.05;
    mixed.net.delay_max = 6;
    mixed.crash_restarts = 3;
    mixed.faults.msg_corrupt_prob = 0.02;
    mixed.faults.storage_corrupt_prob = 0.001;
    mixed.read_interval = 20;
    configs.push_back(mixed);
    for (auto mode : {Mode::hardened, Mode::baseline}) {
        for (auto config : configs) {
            config.mode = mode;
            const auto a = render_machine(run_experiment(config));
            const auto b = render_machine(run_experiment(config));
            o.require(a == b, "reports differ for seed " + std::to_string(config.seed));
        }
    }
    if (o.pass) o.note << configs.size() * 2 << " configurations run twice: byte-identical machine reports";
    return o;
}

Outcome ac10() {
    Outcome o;
    Rng rng(10);
    for (int i = 0; i < 20000; ++i) {
        const auto p = testing::random_payload(rng);
        const auto wire = seal(p).wire();
        o.require(verify(wire) == p, "round trip failed");
        o.require(seal(verify(wire)).wire() == wire, "re-seal differs");
    }
    const auto wire = seal(Payload{0, 0, Decision{}}).wire();
    o.require(xxh64(Envelope::from_wire(wire).body()) == 0x3aeed31209549b2aULL, "digest oracle mismatch");
    std::uint64_t rejected = 0, flips = 0;
    for (std::size_t i = 0; i < wire.size(); ++i) {
        for (int v = 0; v < 256; ++v) {
            if (v == wire[i]) continue;
            auto bad = wire;
            bad[i] = static_cast<std::uint8_t>(v);
            ++flips;
            try {
                (void)verify(bad);
            } catch (const CodecError&) {
                ++rejected;
            }
        }
    }
    o.require(rejected == flips, "a flipped envelope verified");

    ExperimentTrace trace;
    (void)run_experiment(base(10, 500), &trace);
    ListApp app;
    ListApp::State state;
    std::uint64_t previous = 0;
    std::vector<std::uint64_t> chain;
    for (const auto& [seq, request] : trace.applied_requests[0]) {
        if (request) app.execute(state, trace.workload[*request - 1]);
        previous = xxh64([&] {
            auto bytes = app.encode_state(state);
            for (int shift = 56; shift >= 0; shift -= 8) bytes.push_back(static_cast<std::uint8_t>(previous >> shift));
            return bytes;
        }());
        chain.push_back(previous);
    }
    o.require(chain == trace.checksums[0], "rolling checksum chain does not match recomputation");
    if (o.pass) {
        o.note << "20000 generated payloads round-trip, " << flips << "/" << flips
               << " single-byte flips rejected, rolling checksum recomputed over " << chain.size()
               << " delivered instances matches";
    }
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"AC1 paxos safety, fault-free", ac1},
        {"AC2 paxos safety, benign faults", ac2},
        {"AC3 small-model agreement", ac3},
        {"AC4 message-corruption coverage", ac4},
        {"AC5 state/transition-fault coverage", ac5},
        {"AC6 storage-corruption coverage", ac6},
        {"AC7 baseline contrast", ac7},
        {"AC8 crash-recovery", ac8},
        {"AC9 determinism", ac9},
        {"AC10 codec/digest oracles", ac10},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome outcome;
        try {
            outcome = check();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.note << "exception: " << e.what();
        }
        failures += !outcome.pass;
        std::cout << (outcome.pass ? "PASS " : "FAIL ") << name << ": " << outcome.note.str() << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
