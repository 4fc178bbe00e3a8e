#pragma once

#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hpaxos/detection.hpp"
#include "hpaxos/digest.hpp"
#include "hpaxos/messages.hpp"
#include "hpaxos/paxos.hpp"
#include "hpaxos/storage.hpp"

namespace hpaxos {

/// Application-defined summary of a state, compared byte for byte.
using Descriptor = Bytes;

/// What an application supplies to be replicated. execute must be
/// deterministic, describe a pure function of state, encode_state canonical.
template <typename M>
concept StateMachine = std::copy_constructible<typename M::State> &&
    requires(const M& m, typename M::State& state, const typename M::State& cstate, ByteView op,
             const Descriptor& before) {
        { m.initial() } -> std::same_as<typename M::State>;
        m.execute(state, op);
        { m.describe(cstate) } -> std::same_as<Descriptor>;
        { m.semantic_check(op, before, cstate) } -> std::same_as<bool>;
        { m.encode_state(cstate) } -> std::same_as<Bytes>;
        { m.decode_state(op) } -> std::same_as<typename M::State>;
    };

enum class Mode : std::uint8_t { hardened, baseline };
enum class Side : std::uint8_t { primary, shadow };
enum class ReplicaStatus : std::uint8_t { running, halted, crashed };

std::string_view to_string(Mode mode);
std::string_view to_string(ReplicaStatus status);

using RequestId = std::uint64_t;

/// Decided values are commands: [u64 BE request id][operation bytes]. The
/// empty value is a no-op used to fill unconstrained instances.
struct Command {
    RequestId request = 0;
    Bytes op;
};

Value encode_command(RequestId request, ByteView op);
/// nullopt for the no-op value; throws DecodeError for a value shorter than
/// the request id.
std::optional<Command> decode_command(ByteView value);

/// value_k = xxh64(encode_state(state_k) ++ BE64(value_{k-1})), value_{-1} = 0.
std::uint64_t chain_checksum(ByteView encoded_state, std::uint64_t previous);

struct ReplicaConfig {
    ReplicaId id = 0;
    std::uint32_t cluster_size = 1;
    Mode mode = Mode::hardened;
    PaxosTiming timing;
    /// Broadcast a StateDigest after every this many applied instances.
    std::uint64_t digest_interval = 10;
    /// Idle-time digest gossip period in ticks; 0 disables it.
    std::uint64_t digest_gossip_ticks = 100;
    /// Number of recent per-instance digests kept for comparison.
    std::size_t digest_window = 64;
    /// Largest encoded command accepted by submit; 0 means unlimited.
    std::size_t max_value_size = 0;
};

/// Interception points installed by a harness. Empty functions are no-ops.
template <typename State>
struct ReplicaHooks {
    /// Wire bytes of a received envelope, before verification. `ref` counts
    /// receives on this replica.
    std::function<Bytes(ReplicaId, std::uint64_t ref, Bytes)> on_receive;
    /// Each log frame during recovery, before verification.
    std::function<Bytes(ReplicaId, Bytes)> on_log_read;
    /// Asked once per side before each execute; returning true skips it.
    /// `would_change` reports whether executing would alter that side.
    std::function<bool(ReplicaId, InstanceId, Side, const std::function<bool()>& would_change)> suppress_execute;
    /// Runs after each live transition with both states exposed.
    std::function<void(ReplicaId, InstanceId, State& primary, State& shadow)> between_transitions;
    /// Observers.
    std::function<void(ReplicaId, std::uint64_t ref, const Payload&)> on_dispatch;
    std::function<void(ReplicaId, InstanceId, std::optional<RequestId>, bool live)> on_apply;
};

using DetectionSink = std::function<void(const DetectionEvent&)>;
/// Hands one envelope's wire bytes to the transport for a single peer.
using Outbox = std::function<void(ReplicaId from, ReplicaId to, const Bytes& wire)>;

/// A replica: Paxos roles plus the application state kept twice (primary and
/// shadow), a rolling state checksum, per-transition semantic checks and
/// crash-stop on any detected inconsistency. In baseline mode the same code
/// runs with every validation switched off.
template <StateMachine M>
class Replica {
public:
    using State = typename M::State;

    /// Opens the replica over its log, replaying and recovering whatever the
    /// log holds. Recovery failures halt (hardened) or crash (baseline) the
    /// replica rather than throwing.
    Replica(ReplicaConfig config, M machine, std::shared_ptr<LogDevice> log, DetectionSink sink, Outbox outbox,
            ReplicaHooks<State> hooks = {}, std::uint64_t now = 0)
        : config_(config),
          machine_(std::move(machine)),
          wal_(std::move(log)),
          sink_(std::move(sink)),
          outbox_(std::move(outbox)),
          hooks_(std::move(hooks)),
          node_(config.id, config.cluster_size, config.timing),
          primary_(machine_.initial()),
          shadow_(machine_.initial()) {
        recover(now);
    }

    Replica(const Replica&) = delete;
    Replica& operator=(const Replica&) = delete;

    /// Submits an operation under a client request id. Returns the instance
    /// assigned when this replica is the established coordinator.
    std::optional<InstanceId> submit(RequestId request, ByteView op, std::uint64_t now) {
        require_running();
        auto value = encode_command(request, op);
        if (config_.max_value_size != 0 && value.size() > config_.max_value_size) {
            throw EncodeError("command exceeds transport limit");
        }
        Effects fx;
        auto assigned = node_.submit(std::move(value), now, fx);
        process(fx, now);
        return assigned;
    }

    /// Feeds one envelope from the network.
    void receive(ByteView wire, std::uint64_t now) {
        if (status_ != ReplicaStatus::running) return;
        const auto ref = ++receives_;
        Bytes bytes(wire.begin(), wire.end());
        if (hooks_.on_receive) bytes = hooks_.on_receive(config_.id, ref, std::move(bytes));

        Payload message;
        if (hardened()) {
            try {
                message = verify(bytes);
            } catch (const CodecError& e) {
                emit(DetectionEvent{DetectionKind::message_corruption, config_.id, std::nullopt,
                                    std::string("dropped envelope: ") + e.what(), ref});
                return;
            }
        } else {
            try {
                message = decode_unchecked(bytes);
            } catch (const CodecError&) {
                crash();
                return;
            }
        }
        if (hooks_.on_dispatch) hooks_.on_dispatch(config_.id, ref, message);

        Effects fx;
        if (message.is<StateDigest>()) {
            if (hardened()) on_state_digest(message);
        } else {
            guarded([&] { node_.receive(message, now, fx); });
        }
        process(fx, now);
    }

    void tick(std::uint64_t now) {
        if (status_ != ReplicaStatus::running) return;
        Effects fx;
        guarded([&] { node_.tick(now, fx); });
        if (config_.digest_gossip_ticks != 0 && !checksums_.empty() &&
            now >= last_gossip_ + config_.digest_gossip_ticks) {
            last_gossip_ = now;
            const InstanceId seq = checksums_.size() - 1;
            digests_out_.push_back(Payload{seq, config_.id, StateDigest{checksums_.back()}});
        }
        process(fx, now);
    }

    /// Returns a copy of the application state after confirming primary and
    /// shadow still agree; a disagreement halts the replica.
    State get_state() {
        require_running();
        if (hardened() && machine_.describe(primary_) != machine_.describe(shadow_)) {
            halt(DetectionEvent{DetectionKind::state_divergence, config_.id, last_applied(),
                                "primary and shadow descriptors differ on state read"});
            require_running();
        }
        return primary_;
    }

    ReplicaId id() const { return config_.id; }
    Mode mode() const { return config_.mode; }
    ReplicaStatus status() const { return status_; }
    bool running() const { return status_ == ReplicaStatus::running; }
    const std::optional<DetectionEvent>& halt_event() const { return halt_event_; }
    const PaxosNode& node() const { return node_; }

    /// Number of instances applied (including no-ops); the next one applied is
    /// this value.
    InstanceId applied() const { return checksums_.size(); }
    std::optional<InstanceId> last_applied() const {
        if (checksums_.empty()) return std::nullopt;
        return checksums_.size() - 1;
    }
    /// Rolling checksum after each applied instance, indexed by instance.
    const std::vector<std::uint64_t>& checksums() const { return checksums_; }
    std::uint64_t rolling_checksum() const { return checksums_.empty() ? 0 : checksums_.back(); }
    bool has_applied(RequestId request) const { return applied_requests_.contains(request); }
    std::size_t applied_requests() const { return applied_requests_.size(); }

    /// Encoded primary state without validation, for harness inspection.
    Bytes encoded_state() const { return machine_.encode_state(primary_); }
    const State& primary_unchecked() const { return primary_; }
    const State& shadow_unchecked() const { return shadow_; }

private:
    bool hardened() const { return config_.mode == Mode::hardened; }

    void require_running() const {
        if (status_ == ReplicaStatus::halted) {
            throw Halted("replica " + std::to_string(config_.id) + " halted: " + halt_event_->detail);
        }
        if (status_ == ReplicaStatus::crashed) throw Halted("replica " + std::to_string(config_.id) + " crashed");
    }

    void emit(const DetectionEvent& event) {
        if (sink_) sink_(event);
    }

    void halt(DetectionEvent event) {
        if (status_ != ReplicaStatus::running) return;
        status_ = ReplicaStatus::halted;
        halt_event_ = event;
        digests_out_.clear();
        emit(event);
    }

    // The unhardened replica has no detection; anything that throws takes the
    // process down.
    void crash() {
        if (status_ != ReplicaStatus::running) return;
        status_ = ReplicaStatus::crashed;
        digests_out_.clear();
    }

    template <typename F>
    void guarded(F&& f) {
        try {
            f();
        } catch (const StorageIoError&) {
            crash();
        } catch (const std::exception&) {
            if (hardened()) throw;
            crash();
        }
    }

    void recover(std::uint64_t now) {
        try {
            LogReadHook read_hook;
            if (hooks_.on_log_read) {
                read_hook = [this](Bytes frame) { return hooks_.on_log_read(config_.id, std::move(frame)); };
            }
            const auto replayed = wal_.replay(read_hook, hardened());
            const auto recovered = recover_state(replayed.payloads, hardened());
            node_ = PaxosNode(config_.id, config_.cluster_size, config_.timing, recovered);
            node_.restart_clock(now);
            last_gossip_ = now;
            if (recovered.applied_up_to) {
                for (InstanceId seq = 0; seq <= *recovered.applied_up_to; ++seq) {
                    auto it = recovered.learner.decided.find(seq);
                    if (it == recovered.learner.decided.end()) {
                        crash();
                        return;
                    }
                    reconstruct(seq, it->second);
                    auto marker = recovered.applied_checksums.find(seq);
                    if (hardened() && marker != recovered.applied_checksums.end() &&
                        marker->second != checksums_.back()) {
                        halt(DetectionEvent{DetectionKind::storage_corruption, config_.id, seq,
                                            "applied marker checksum disagrees with replayed state"});
                        return;
                    }
                }
            }
        } catch (const StorageCorruption& e) {
            if (hardened()) {
                halt(DetectionEvent{DetectionKind::storage_corruption, config_.id, std::nullopt, e.what(), 0});
            } else {
                crash();
            }
            return;
        } catch (const RecoveryError& e) {
            if (hardened()) {
                halt(DetectionEvent{e.kind(), config_.id, e.seq(), e.what(), 0});
            } else {
                crash();
            }
            return;
        } catch (const std::exception&) {
            crash();
            return;
        }
        Effects fx;
        node_.deliver_ready(fx);
        process(fx, now);
    }

    // Rebuilds state for an instance applied before the restart: no hooks, no
    // markers, no checks beyond the marker comparison done by the caller.
    void reconstruct(InstanceId seq, const Value& value) {
        auto command = decode_command(value);
        std::optional<RequestId> request;
        if (command && !applied_requests_.contains(command->request)) {
            machine_.execute(primary_, command->op);
            machine_.execute(shadow_, command->op);
            applied_requests_.insert(command->request);
            request = command->request;
        }
        advance_checksum();
        if (hooks_.on_apply) hooks_.on_apply(config_.id, seq, request, false);
    }

    void process(Effects& fx, std::uint64_t now) {
        if (status_ != ReplicaStatus::running) return;
        try {
            for (const auto& record : fx.persist) wal_.append(record);
            if (fx.conflict && hardened()) {
                halt(DetectionEvent{DetectionKind::conflicting_decision, config_.id, fx.conflict->instance,
                                    "second value decided for instance " + std::to_string(fx.conflict->instance)});
                return;
            }
            for (const auto& delivery : fx.deliver) {
                apply_transition(delivery.instance, delivery.value);
                if (status_ != ReplicaStatus::running) return;
            }
            wal_.sync();
        } catch (const StorageIoError&) {
            crash();
            return;
        }
        (void)now;
        for (const auto& out : fx.send) transmit(out.to, out.payload);
        auto digests = std::move(digests_out_);
        digests_out_.clear();
        for (const auto& d : digests) transmit(std::nullopt, d);
    }

    void transmit(std::optional<ReplicaId> to, const Payload& payload) {
        if (status_ != ReplicaStatus::running || !outbox_) return;
        const auto wire = seal(payload).wire();
        if (to) {
            outbox_(config_.id, *to, wire);
            return;
        }
        for (ReplicaId r = 0; r < config_.cluster_size; ++r) {
            if (r != config_.id) outbox_(config_.id, r, wire);
        }
    }

    bool would_change(const State& state, ByteView op) const {
        State probe = state;
        machine_.execute(probe, op);
        return machine_.encode_state(probe) != machine_.encode_state(state);
    }

    bool suppressed(InstanceId seq, Side side, const State& state, ByteView op) {
        if (!hooks_.suppress_execute) return false;
        return hooks_.suppress_execute(config_.id, seq, side, [&] { return would_change(state, op); });
    }

    void apply_transition(InstanceId seq, const Value& value) {
        // A later op can mask a corruption (e.g. removing an injected element), so check before too.
        if (hardened() && machine_.describe(primary_) != machine_.describe(shadow_)) {
            halt(DetectionEvent{DetectionKind::state_divergence, config_.id, seq,
                                "primary and shadow descriptors differ before transition"});
            return;
        }
        std::optional<Command> command;
        try {
            command = decode_command(value);
        } catch (const DecodeError& e) {
            if (hardened()) {
                halt(DetectionEvent{DetectionKind::semantic_failure, config_.id, seq, e.what()});
            } else {
                crash();
            }
            return;
        }

        std::optional<RequestId> request;
        if (command && !applied_requests_.contains(command->request)) {
            const ByteView op = command->op;
            try {
                const auto before = hardened() ? machine_.describe(primary_) : Descriptor{};
                if (!suppressed(seq, Side::primary, primary_, op)) machine_.execute(primary_, op);
                if (!suppressed(seq, Side::shadow, shadow_, op)) machine_.execute(shadow_, op);
                if (hardened() && !machine_.semantic_check(op, before, primary_)) {
                    halt(DetectionEvent{DetectionKind::semantic_failure, config_.id, seq,
                                        "semantic check rejected transition"});
                    return;
                }
            } catch (const std::exception& e) {
                if (hardened()) {
                    halt(DetectionEvent{DetectionKind::semantic_failure, config_.id, seq,
                                        std::string("transition failed: ") + e.what()});
                } else {
                    crash();
                }
                return;
            }
            applied_requests_.insert(command->request);
            request = command->request;
        }

        if (hardened() && machine_.describe(primary_) != machine_.describe(shadow_)) {
            halt(DetectionEvent{DetectionKind::state_divergence, config_.id, seq,
                                "primary and shadow descriptors differ after transition"});
            return;
        }

        advance_checksum();
        wal_.append(Payload{seq, config_.id, Applied{checksums_.back()}});
        if (hooks_.on_apply) hooks_.on_apply(config_.id, seq, request, true);
        if (config_.digest_interval != 0 && (seq + 1) % config_.digest_interval == 0) {
            digests_out_.push_back(Payload{seq, config_.id, StateDigest{checksums_.back()}});
        }
        if (hooks_.between_transitions) hooks_.between_transitions(config_.id, seq, primary_, shadow_);
    }

    void advance_checksum() {
        const auto previous = checksums_.empty() ? 0 : checksums_.back();
        checksums_.push_back(chain_checksum(machine_.encode_state(primary_), previous));
        const InstanceId seq = checksums_.size() - 1;
        own_digests_[seq] = checksums_.back();
        while (own_digests_.size() > config_.digest_window) own_digests_.erase(own_digests_.begin());
        while (!digest_reports_.empty() && digest_reports_.begin()->first < own_digests_.begin()->first) {
            digest_reports_.erase(digest_reports_.begin());
        }
    }

    // Majority-blame rule: a replica halts itself when its digest disagrees
    // with a value reported identically by a quorum. Without a quorum view it
    // waits for more reports; a complete view with no quorum also halts.
    void on_state_digest(const Payload& message) {
        const auto seq = message.instance;
        auto own = own_digests_.find(seq);
        if (own == own_digests_.end()) return;  // future or outside the window
        auto& reports = digest_reports_[seq];
        reports[config_.id] = own->second;
        if (message.sender < config_.cluster_size) reports[message.sender] = message.as<StateDigest>().checksum;

        bool disagreement = false;
        std::map<std::uint64_t, std::uint32_t> counts;
        for (const auto& [replica, checksum] : reports) {
            ++counts[checksum];
            disagreement |= checksum != own->second;
        }
        if (!disagreement) return;
        for (const auto& [checksum, count] : counts) {
            if (count >= quorum(config_.cluster_size)) {
                if (checksum != own->second) {
                    halt(DetectionEvent{DetectionKind::digest_mismatch, config_.id, seq,
                                        "local state checksum disagrees with a quorum of replicas"});
                }
                return;
            }
        }
        if (reports.size() == config_.cluster_size) {
            halt(DetectionEvent{DetectionKind::digest_mismatch, config_.id, seq,
                                "state checksums disagree with no quorum view"});
        }
    }

    ReplicaConfig config_;
    M machine_;
    WriteAheadLog wal_;
    DetectionSink sink_;
    Outbox outbox_;
    ReplicaHooks<State> hooks_;
    PaxosNode node_;

    State primary_;
    State shadow_;
    std::set<RequestId> applied_requests_;
    std::vector<std::uint64_t> checksums_;
    std::map<InstanceId, std::uint64_t> own_digests_;
    std::map<InstanceId, std::map<ReplicaId, std::uint64_t>> digest_reports_;
    std::vector<Payload> digests_out_;
    std::uint64_t last_gossip_ = 0;

    ReplicaStatus status_ = ReplicaStatus::running;
    std::optional<DetectionEvent> halt_event_;
    std::uint64_t receives_ = 0;
};

}  // namespace hpaxos
