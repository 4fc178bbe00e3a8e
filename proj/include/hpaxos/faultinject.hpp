#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hpaxos/bytes.hpp"
#include "hpaxos/replica.hpp"
#include "hpaxos/rng.hpp"

namespace hpaxos {

enum class FaultKind : std::uint8_t { message, state, transition, storage };

inline constexpr FaultKind kFaultKinds[] = {FaultKind::message, FaultKind::state, FaultKind::transition,
                                            FaultKind::storage};

std::string_view to_string(FaultKind kind);

struct FaultConfig {
    std::uint64_t seed = 1;
    double msg_corrupt_prob = 0.0;
    double state_corrupt_prob = 0.0;
    double transition_drop_prob = 0.0;
    double storage_corrupt_prob = 0.0;
    /// Replicas eligible for injection; empty means all.
    std::set<ReplicaId> targets;

    void validate() const;
};

struct InjectionRecord {
    FaultKind kind = FaultKind::message;
    ReplicaId replica = 0;
    /// Instance after which (state) or during which (transition) it happened.
    std::optional<InstanceId> seq;
    /// Receive counter for message faults, restart ordinal for storage faults.
    std::uint64_t ref = 0;
    /// Transition faults: which executes were suppressed.
    bool primary = false;
    bool shadow = false;
    std::string detail;
};

/// Probability-driven injector. Every hook consults the same seeded generator
/// in call order, so (seed, config) and the call sequence reproduce the
/// schedule exactly; the hooks behave identically for hardened and baseline
/// replicas. Each actual change produces exactly one InjectionRecord.
class FaultInjector {
public:
    explicit FaultInjector(FaultConfig config);

    /// Replaces one uniformly chosen body byte of an envelope's wire form with
    /// a different value; length prefix and checksum are untouched.
    Bytes corrupt_message(ReplicaId replica, std::uint64_t ref, Bytes wire);

    /// Mutates one side (chosen uniformly) of a list state: removes an
    /// element, inserts a string, or changes one character.
    void corrupt_state(ReplicaId replica, InstanceId seq, std::vector<std::string>& primary,
                       std::vector<std::string>& shadow);

    /// Decides whether to suppress one side's execute. Only suppressions that
    /// would change the state count (and happen).
    bool drop_transition(ReplicaId replica, InstanceId seq, Side side, const std::function<bool()>& would_change);

    /// Flips one byte of a log frame read during recovery.
    Bytes corrupt_storage_read(ReplicaId replica, Bytes frame);

    /// Restart ordinal stamped on storage injection records.
    void set_storage_ref(std::uint64_t ref) { storage_ref_ = ref; }

    /// Wires the hooks into a replica of the list application.
    template <typename State>
    ReplicaHooks<State> hooks() {
        ReplicaHooks<State> h;
        h.on_receive = [this](ReplicaId r, std::uint64_t ref, Bytes wire) {
            return corrupt_message(r, ref, std::move(wire));
        };
        h.on_log_read = [this](ReplicaId r, Bytes frame) { return corrupt_storage_read(r, std::move(frame)); };
        h.suppress_execute = [this](ReplicaId r, InstanceId seq, Side side, const std::function<bool()>& change) {
            return drop_transition(r, seq, side, change);
        };
        h.between_transitions = [this](ReplicaId r, InstanceId seq, State& primary, State& shadow) {
            corrupt_state(r, seq, primary, shadow);
        };
        return h;
    }

    const FaultConfig& config() const { return config_; }
    const std::vector<InjectionRecord>& records() const { return records_; }

private:
    bool targeted(ReplicaId replica) const;
    std::string random_text();

    FaultConfig config_;
    Rng rng_;
    std::uint64_t storage_ref_ = 0;
    std::vector<InjectionRecord> records_;
};

}  // namespace hpaxos
