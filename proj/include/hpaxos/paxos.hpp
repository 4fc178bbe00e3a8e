#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "hpaxos/messages.hpp"

namespace hpaxos {

/// Majority quorum: floor(n/2) + 1.
constexpr std::uint32_t quorum(std::uint32_t n) { return n / 2 + 1; }

struct AcceptedSlot {
    Ballot ballot;
    Value value;
    friend bool operator==(const AcceptedSlot&, const AcceptedSlot&) = default;
};

/// Acceptor memory. `promised` is a single acceptor-wide ballot: a promise made
/// for instance i also covers every other instance, which is never weaker than
/// a per-instance promise.
struct AcceptorState {
    Ballot promised;
    std::map<InstanceId, AcceptedSlot> accepted;
    friend bool operator==(const AcceptorState&, const AcceptorState&) = default;
};

struct LearnerState {
    std::map<InstanceId, Value> decided;
    /// Every instance below this has been handed to the application.
    InstanceId next_to_deliver = 0;
    friend bool operator==(const LearnerState&, const LearnerState&) = default;
};

struct Outgoing {
    /// nullopt means every other replica.
    std::optional<ReplicaId> to;
    Payload payload;
};

struct Delivery {
    InstanceId instance = 0;
    Value value;
};

struct Conflict {
    InstanceId instance = 0;
    Value recorded;
    Value incoming;
};

/// Output of one call into PaxosNode. `persist` must be durable before any
/// message in `send` leaves the replica.
struct Effects {
    std::vector<Payload> persist;
    std::vector<Outgoing> send;
    std::vector<Delivery> deliver;
    std::optional<Conflict> conflict;

    bool empty() const { return persist.empty() && send.empty() && deliver.empty() && !conflict; }
};

struct PaxosTiming {
    std::uint64_t heartbeat_interval = 5;
    std::uint64_t suspect_timeout = 40;
    std::uint64_t retry_timeout = 30;
    std::size_t catchup_batch = 64;
    /// Instances at or beyond next_to_deliver + window are ignored.
    std::uint64_t instance_window = 4096;
};

/// Heartbeat-timeout failure detector over virtual ticks. A replica always
/// considers itself alive; the coordinator is the lowest alive id.
class FailureDetector {
public:
    FailureDetector(ReplicaId self, std::uint32_t cluster_size, std::uint64_t timeout);

    void heard(ReplicaId from, std::uint64_t now);
    bool alive(ReplicaId r, std::uint64_t now) const;
    ReplicaId coordinator(std::uint64_t now) const;

private:
    ReplicaId self_;
    std::uint64_t timeout_;
    std::vector<std::uint64_t> last_heard_;
};

/// State recovered from a replayed log (see storage.hpp).
struct RecoveredState {
    AcceptorState acceptor;
    LearnerState learner;
    std::uint64_t highest_round = 0;
    std::optional<InstanceId> applied_up_to;
    /// Rolling checksum recorded in each applied marker.
    std::map<InstanceId, std::uint64_t> applied_checksums;
};

/// One replica's multi-Paxos roles. Pure with respect to I/O: every input
/// returns its persistence, sends and deliveries through Effects, and messages
/// addressed to itself are processed internally within the same call.
class PaxosNode {
public:
    enum class Phase : std::uint8_t { idle, preparing, leading };

    PaxosNode(ReplicaId self, std::uint32_t cluster_size, PaxosTiming timing = {});
    PaxosNode(ReplicaId self, std::uint32_t cluster_size, PaxosTiming timing, const RecoveredState& recovered);

    /// Coordinator: queues the value and proposes it if phase 1 is complete,
    /// returning the assigned instance. Other replicas forward it to their
    /// coordinator and return nullopt.
    std::optional<InstanceId> submit(Value value, std::uint64_t now, Effects& out);

    /// Handles a verified payload from another replica.
    void receive(const Payload& message, std::uint64_t now, Effects& out);

    /// Timer processing: heartbeats, coordinator election, retries, catch-up.
    void tick(std::uint64_t now, Effects& out);

    /// Starts phase 1 with a fresh ballot regardless of the failure detector.
    void lead(std::uint64_t now, Effects& out);
    /// Adds a value to the proposal queue without any coordinator check.
    void enqueue(Value value);

    /// Delivers any decided instances that are contiguous with next_to_deliver.
    void deliver_ready(Effects& out);

    /// Treats every peer as freshly heard at `now`. Called after a restart so
    /// the recovering replica does not suspect everyone and seize coordination.
    void restart_clock(std::uint64_t now);

    ReplicaId id() const { return self_; }
    std::uint32_t cluster_size() const { return n_; }
    bool is_coordinator(std::uint64_t now) const { return fd_.coordinator(now) == self_; }
    ReplicaId coordinator(std::uint64_t now) const { return fd_.coordinator(now); }
    Phase phase() const { return phase_; }
    const Ballot& ballot() const { return ballot_; }
    const AcceptorState& acceptor() const { return acceptor_; }
    const LearnerState& learner() const { return learner_; }
    std::size_t pending() const { return pending_.size() + in_flight_.size(); }

    /// Canonical encoding of protocol state (acceptor, learner, proposer),
    /// used by the model checker to deduplicate explored states.
    Bytes fingerprint() const;

    // Role handlers, public for direct unit testing.
    void on_prepare(const Payload& m, Effects& out);
    void on_promise(const Payload& m, Effects& out);
    void on_propose(const Payload& m, Effects& out);
    void on_accepted(const Payload& m, Effects& out);
    void on_decision(const Payload& m, Effects& out);

private:
    struct InFlight {
        Value value;
        std::uint64_t sent_at = 0;
    };
    struct Tally {
        Value value;
        std::set<ReplicaId> voters;
    };

    Payload make(InstanceId instance, Body body) const;
    void send_to(ReplicaId to, Payload p, Effects& out);
    void broadcast(Payload p, Effects& out);
    void dispatch(const Payload& m, Effects& out);
    void drain_local(Effects& out);

    void start_phase1(Effects& out);
    void complete_phase1(Effects& out);
    void propose(InstanceId instance, Value value, Effects& out);
    void propose_pending(Effects& out);
    void step_down();
    void decide(InstanceId instance, const Value& value, bool announce, Effects& out);
    void on_nack(const Payload& m);
    void on_client_request(const Payload& m, Effects& out);
    void on_decision_request(const Payload& m, Effects& out);
    InstanceId highest_decided_plus_one() const;

    ReplicaId self_;
    std::uint32_t n_;
    PaxosTiming timing_;
    FailureDetector fd_;
    std::uint64_t now_ = 0;

    AcceptorState acceptor_;
    LearnerState learner_;
    std::map<InstanceId, std::map<Ballot, Tally>> tallies_;

    // Proposer.
    Phase phase_ = Phase::idle;
    Ballot ballot_;
    std::uint64_t highest_round_ = 0;
    InstanceId prepare_from_ = 0;
    std::uint64_t phase_started_ = 0;
    std::uint64_t backoff_until_ = 0;
    std::map<ReplicaId, Promise> promises_;
    std::deque<Value> pending_;
    std::map<InstanceId, InFlight> in_flight_;
    InstanceId next_instance_ = 0;

    std::uint64_t last_heartbeat_ = 0;
    bool sent_heartbeat_ = false;
    std::uint64_t last_catchup_ = 0;
    std::map<ReplicaId, InstanceId> peer_progress_;

    std::deque<Payload> local_;
};

}  // namespace hpaxos
