#include "hpaxos/paxos.hpp"

#include <algorithm>

namespace hpaxos {

FailureDetector::FailureDetector(ReplicaId self, std::uint32_t cluster_size, std::uint64_t timeout)
    : self_(self), timeout_(timeout), last_heard_(cluster_size, 0) {}

void FailureDetector::heard(ReplicaId from, std::uint64_t now) {
    if (from < last_heard_.size()) last_heard_[from] = std::max(last_heard_[from], now);
}

bool FailureDetector::alive(ReplicaId r, std::uint64_t now) const {
    if (r == self_) return true;
    if (r >= last_heard_.size()) return false;
    return now < last_heard_[r] + timeout_;
}

ReplicaId FailureDetector::coordinator(std::uint64_t now) const {
    for (ReplicaId r = 0; r < last_heard_.size(); ++r) {
        if (alive(r, now)) return r;
    }
    return self_;
}

PaxosNode::PaxosNode(ReplicaId self, std::uint32_t cluster_size, PaxosTiming timing)
    : self_(self), n_(cluster_size), timing_(timing), fd_(self, cluster_size, timing.suspect_timeout) {}

PaxosNode::PaxosNode(ReplicaId self, std::uint32_t cluster_size, PaxosTiming timing,
                     const RecoveredState& recovered)
    : PaxosNode(self, cluster_size, timing) {
    acceptor_ = recovered.acceptor;
    learner_ = recovered.learner;
    highest_round_ = std::max(recovered.highest_round, acceptor_.promised.round);
}

void PaxosNode::restart_clock(std::uint64_t now) {
    now_ = now;
    for (ReplicaId r = 0; r < n_; ++r) fd_.heard(r, now);
    last_heartbeat_ = now;
    last_catchup_ = now;
    backoff_until_ = now;
}

Payload PaxosNode::make(InstanceId instance, Body body) const {
    return Payload{instance, self_, std::move(body)};
}

void PaxosNode::send_to(ReplicaId to, Payload p, Effects& out) {
    if (to == self_) {
        local_.push_back(std::move(p));
    } else {
        out.send.push_back(Outgoing{to, std::move(p)});
    }
}

void PaxosNode::broadcast(Payload p, Effects& out) {
    out.send.push_back(Outgoing{std::nullopt, p});
    local_.push_back(std::move(p));
}

void PaxosNode::drain_local(Effects& out) {
    while (!local_.empty()) {
        auto m = std::move(local_.front());
        local_.pop_front();
        dispatch(m, out);
    }
}

void PaxosNode::dispatch(const Payload& m, Effects& out) {
    const bool slot_message = m.is<Propose>() || m.is<Accepted>() || m.is<Decision>();
    if (slot_message && m.instance >= learner_.next_to_deliver + timing_.instance_window) return;

    if (m.is<Prepare>()) {
        on_prepare(m, out);
    } else if (m.is<Promise>()) {
        on_promise(m, out);
    } else if (m.is<Propose>()) {
        on_propose(m, out);
    } else if (m.is<Accepted>()) {
        on_accepted(m, out);
    } else if (m.is<Decision>()) {
        on_decision(m, out);
    } else if (m.is<ClientRequest>()) {
        on_client_request(m, out);
    } else if (m.is<Nack>()) {
        on_nack(m);
    } else if (m.is<Heartbeat>()) {
        auto& progress = peer_progress_[m.sender];
        progress = std::max(progress, m.instance);
    } else if (m.is<DecisionRequest>()) {
        on_decision_request(m, out);
    }
    // StateDigest and Applied belong to the replica layer.
}

std::optional<InstanceId> PaxosNode::submit(Value value, std::uint64_t now, Effects& out) {
    now_ = now;
    std::optional<InstanceId> assigned;
    if (!is_coordinator(now)) {
        send_to(fd_.coordinator(now), make(0, ClientRequest{std::move(value)}), out);
    } else if (phase_ == Phase::leading) {
        assigned = next_instance_++;
        propose(*assigned, std::move(value), out);
    } else {
        pending_.push_back(std::move(value));
        if (phase_ == Phase::idle && now >= backoff_until_) start_phase1(out);
    }
    drain_local(out);
    return assigned;
}

void PaxosNode::receive(const Payload& message, std::uint64_t now, Effects& out) {
    now_ = now;
    fd_.heard(message.sender, now);
    dispatch(message, out);
    drain_local(out);
}

void PaxosNode::tick(std::uint64_t now, Effects& out) {
    now_ = now;
    if (!sent_heartbeat_ || now - last_heartbeat_ >= timing_.heartbeat_interval) {
        out.send.push_back(Outgoing{std::nullopt, make(learner_.next_to_deliver, Heartbeat{})});
        last_heartbeat_ = now;
        sent_heartbeat_ = true;
    }

    if (is_coordinator(now)) {
        if (phase_ == Phase::idle && now >= backoff_until_) {
            start_phase1(out);
        } else if (phase_ == Phase::preparing && now - phase_started_ >= timing_.retry_timeout) {
            start_phase1(out);
        } else if (phase_ == Phase::leading) {
            for (auto& [instance, flight] : in_flight_) {
                if (now - flight.sent_at < timing_.retry_timeout) continue;
                flight.sent_at = now;
                broadcast(make(instance, Propose{ballot_, flight.value}), out);
            }
        }
    } else {
        if (phase_ != Phase::idle) step_down();
        const auto coordinator = fd_.coordinator(now);
        for (auto& value : pending_) {
            if (!value.empty()) send_to(coordinator, make(0, ClientRequest{std::move(value)}), out);
        }
        pending_.clear();
    }

    if (now - last_catchup_ >= timing_.retry_timeout) {
        const auto want = learner_.next_to_deliver;
        std::optional<ReplicaId> target;
        InstanceId best = want;
        for (const auto& [peer, progress] : peer_progress_) {
            if (progress > best) {
                best = progress;
                target = peer;
            }
        }
        if (target && !learner_.decided.contains(want)) {
            send_to(*target, make(want, DecisionRequest{}), out);
            last_catchup_ = now;
        }
    }
    drain_local(out);
}

void PaxosNode::lead(std::uint64_t now, Effects& out) {
    now_ = now;
    start_phase1(out);
    drain_local(out);
}

void PaxosNode::enqueue(Value value) { pending_.push_back(std::move(value)); }

void PaxosNode::start_phase1(Effects& out) {
    step_down();
    const auto round = std::max({highest_round_, ballot_.round, acceptor_.promised.round}) + 1;
    ballot_ = Ballot{round, self_};
    highest_round_ = round;
    phase_ = Phase::preparing;
    prepare_from_ = learner_.next_to_deliver;
    phase_started_ = now_;
    out.persist.push_back(make(prepare_from_, Prepare{ballot_}));
    broadcast(make(prepare_from_, Prepare{ballot_}), out);
}

void PaxosNode::step_down() {
    phase_ = Phase::idle;
    promises_.clear();
    // In-flight values go back to the head of the queue in instance order.
    std::deque<Value> requeue;
    for (auto& [instance, flight] : in_flight_) {
        if (!flight.value.empty()) requeue.push_back(std::move(flight.value));
    }
    in_flight_.clear();
    pending_.insert(pending_.begin(), std::make_move_iterator(requeue.begin()),
                    std::make_move_iterator(requeue.end()));
}

void PaxosNode::on_prepare(const Payload& m, Effects& out) {
    const auto& ballot = m.as<Prepare>().ballot;
    if (ballot > acceptor_.promised) {
        acceptor_.promised = ballot;
        out.persist.push_back(make(m.instance, Promise{ballot, {}}));
    } else if (ballot != acceptor_.promised) {
        send_to(m.sender, make(m.instance, Nack{acceptor_.promised}), out);
        return;
    }
    Promise reply{ballot, {}};
    for (auto it = acceptor_.accepted.lower_bound(m.instance); it != acceptor_.accepted.end(); ++it) {
        reply.accepted.push_back(PromiseEntry{it->first, it->second.ballot, it->second.value});
    }
    send_to(m.sender, make(m.instance, std::move(reply)), out);
}

void PaxosNode::on_promise(const Payload& m, Effects& out) {
    const auto& promise = m.as<Promise>();
    if (phase_ != Phase::preparing || promise.ballot != ballot_ || m.instance != prepare_from_) return;
    promises_[m.sender] = promise;
    if (promises_.size() >= quorum(n_)) complete_phase1(out);
}

void PaxosNode::complete_phase1(Effects& out) {
    std::map<InstanceId, const PromiseEntry*> best;
    for (const auto& [replica, promise] : promises_) {
        for (const auto& entry : promise.accepted) {
            if (entry.instance < prepare_from_ || entry.instance >= prepare_from_ + timing_.instance_window) continue;
            auto& slot = best[entry.instance];
            if (slot == nullptr || entry.ballot > slot->ballot) slot = &entry;
        }
    }

    InstanceId top = prepare_from_;
    if (!best.empty()) top = std::max(top, best.rbegin()->first + 1);
    top = std::max(top, highest_decided_plus_one());

    phase_ = Phase::leading;
    for (InstanceId i = prepare_from_; i < top; ++i) {
        if (learner_.decided.contains(i)) continue;
        auto found = best.find(i);
        // Unconstrained gaps are filled with an empty no-op value.
        propose(i, found != best.end() ? found->second->value : Value{}, out);
    }
    next_instance_ = top;
    promises_.clear();
    propose_pending(out);
}

void PaxosNode::propose(InstanceId instance, Value value, Effects& out) {
    in_flight_[instance] = InFlight{value, now_};
    broadcast(make(instance, Propose{ballot_, std::move(value)}), out);
}

void PaxosNode::propose_pending(Effects& out) {
    while (phase_ == Phase::leading && !pending_.empty()) {
        auto value = std::move(pending_.front());
        pending_.pop_front();
        propose(next_instance_++, std::move(value), out);
    }
}

void PaxosNode::on_propose(const Payload& m, Effects& out) {
    const auto& propose = m.as<Propose>();
    if (propose.ballot < acceptor_.promised) {
        send_to(m.sender, make(m.instance, Nack{acceptor_.promised}), out);
        return;
    }
    acceptor_.promised = propose.ballot;
    AcceptedSlot slot{propose.ballot, propose.value};
    auto it = acceptor_.accepted.find(m.instance);
    if (it == acceptor_.accepted.end() || it->second != slot) {
        acceptor_.accepted[m.instance] = slot;
        out.persist.push_back(make(m.instance, Accepted{propose.ballot, propose.value}));
    }
    broadcast(make(m.instance, Accepted{propose.ballot, propose.value}), out);
}

void PaxosNode::on_accepted(const Payload& m, Effects& out) {
    if (m.instance < learner_.next_to_deliver) return;
    const auto& accepted = m.as<Accepted>();
    auto& tally = tallies_[m.instance][accepted.ballot];
    if (tally.voters.empty()) {
        tally.value = accepted.value;
    } else if (tally.value != accepted.value) {
        return;  // same ballot, different value: cannot come from a correct proposer
    }
    tally.voters.insert(m.sender);
    if (tally.voters.size() >= quorum(n_)) {
        const Value value = tally.value;
        decide(m.instance, value, accepted.ballot.proposer == self_, out);
    }
}

void PaxosNode::on_decision(const Payload& m, Effects& out) {
    decide(m.instance, m.as<Decision>().value, false, out);
}

void PaxosNode::decide(InstanceId instance, const Value& value, bool announce, Effects& out) {
    auto it = learner_.decided.find(instance);
    if (it != learner_.decided.end()) {
        if (it->second != value && !out.conflict) out.conflict = Conflict{instance, it->second, value};
        return;
    }
    learner_.decided.emplace(instance, value);
    out.persist.push_back(make(instance, Decision{value}));
    if (announce) out.send.push_back(Outgoing{std::nullopt, make(instance, Decision{value})});

    auto flight = in_flight_.find(instance);
    if (flight != in_flight_.end()) {
        if (flight->second.value != value && !flight->second.value.empty()) {
            pending_.push_front(std::move(flight->second.value));
        }
        in_flight_.erase(flight);
        propose_pending(out);
    }
    deliver_ready(out);
}

void PaxosNode::deliver_ready(Effects& out) {
    for (;;) {
        auto it = learner_.decided.find(learner_.next_to_deliver);
        if (it == learner_.decided.end()) break;
        out.deliver.push_back(Delivery{it->first, it->second});
        tallies_.erase(it->first);
        ++learner_.next_to_deliver;
    }
}

void PaxosNode::on_nack(const Payload& m) {
    const auto& promised = m.as<Nack>().promised;
    highest_round_ = std::max(highest_round_, promised.round);
    if (promised > ballot_ && phase_ != Phase::idle) {
        step_down();
        backoff_until_ = now_ + timing_.retry_timeout / 3;
    }
}

void PaxosNode::on_client_request(const Payload& m, Effects& out) {
    if (!is_coordinator(now_)) return;  // forwarded requests are not forwarded again
    auto value = m.as<ClientRequest>().value;
    if (phase_ == Phase::leading) {
        propose(next_instance_++, std::move(value), out);
    } else {
        pending_.push_back(std::move(value));
    }
}

void PaxosNode::on_decision_request(const Payload& m, Effects& out) {
    InstanceId i = m.instance;
    for (std::size_t sent = 0; sent < timing_.catchup_batch; ++sent, ++i) {
        auto it = learner_.decided.find(i);
        if (it == learner_.decided.end()) break;
        send_to(m.sender, make(i, Decision{it->second}), out);
    }
}

InstanceId PaxosNode::highest_decided_plus_one() const {
    if (learner_.decided.empty()) return 0;
    return learner_.decided.rbegin()->first + 1;
}

Bytes PaxosNode::fingerprint() const {
    Bytes out;
    ByteWriter w(out);
    auto ballot = [&](const Ballot& b) {
        w.u64(b.round);
        w.u32(b.proposer);
    };
    ballot(acceptor_.promised);
    w.u32(static_cast<std::uint32_t>(acceptor_.accepted.size()));
    for (const auto& [i, slot] : acceptor_.accepted) {
        w.u64(i);
        ballot(slot.ballot);
        w.blob(slot.value);
    }
    w.u64(learner_.next_to_deliver);
    w.u32(static_cast<std::uint32_t>(learner_.decided.size()));
    for (const auto& [i, v] : learner_.decided) {
        w.u64(i);
        w.blob(v);
    }
    w.u32(static_cast<std::uint32_t>(tallies_.size()));
    for (const auto& [i, by_ballot] : tallies_) {
        w.u64(i);
        w.u32(static_cast<std::uint32_t>(by_ballot.size()));
        for (const auto& [b, tally] : by_ballot) {
            ballot(b);
            w.blob(tally.value);
            w.u32(static_cast<std::uint32_t>(tally.voters.size()));
            for (auto v : tally.voters) w.u32(v);
        }
    }
    w.u8(static_cast<std::uint8_t>(phase_));
    ballot(ballot_);
    w.u64(highest_round_);
    w.u64(prepare_from_);
    w.u32(static_cast<std::uint32_t>(promises_.size()));
    for (const auto& [r, promise] : promises_) {
        w.u32(r);
        w.u32(static_cast<std::uint32_t>(promise.accepted.size()));
        for (const auto& e : promise.accepted) {
            w.u64(e.instance);
            ballot(e.ballot);
            w.blob(e.value);
        }
    }
    w.u32(static_cast<std::uint32_t>(pending_.size()));
    for (const auto& v : pending_) w.blob(v);
    w.u32(static_cast<std::uint32_t>(in_flight_.size()));
    for (const auto& [i, flight] : in_flight_) {
        w.u64(i);
        w.blob(flight.value);
    }
    w.u64(next_instance_);
    return out;
}

}  // namespace hpaxos
