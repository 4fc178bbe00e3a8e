#include "hpaxos/faultinject.hpp"

#include <stdexcept>

#include "hpaxos/messages.hpp"

namespace hpaxos {

std::string_view to_string(FaultKind kind) {
    switch (kind) {
        case FaultKind::message:
            return "message";
        case FaultKind::state:
            return "state";
        case FaultKind::transition:
            return "transition";
        case FaultKind::storage:
            return "storage";
    }
    return "unknown";
}

void FaultConfig::validate() const {
    for (double p : {msg_corrupt_prob, state_corrupt_prob, transition_drop_prob, storage_corrupt_prob}) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("fault probabilities must be in [0,1]");
    }
}

FaultInjector::FaultInjector(FaultConfig config) : config_(std::move(config)), rng_(config_.seed) {
    config_.validate();
}

bool FaultInjector::targeted(ReplicaId replica) const {
    return config_.targets.empty() || config_.targets.contains(replica);
}

std::string FaultInjector::random_text() {
    // Upper-case so an injected string never equals a workload string.
    std::string s(6, 'A');
    for (auto& c : s) c = static_cast<char>('A' + rng_.below(26));
    return s;
}

Bytes FaultInjector::corrupt_message(ReplicaId replica, std::uint64_t ref, Bytes wire) {
    if (!targeted(replica) || wire.size() <= kEnvelopeOverhead) return wire;
    if (!rng_.chance(config_.msg_corrupt_prob)) return wire;
    const auto body_size = wire.size() - kEnvelopeOverhead;
    const auto at = 4 + rng_.below(body_size);
    const auto old = wire[at];
    // Any of the 255 other values.
    wire[at] = static_cast<std::uint8_t>((old + 1 + rng_.below(255)) & 0xFF);
    records_.push_back(InjectionRecord{FaultKind::message, replica, std::nullopt, ref, false, false,
                                       "body byte " + std::to_string(at - 4)});
    return wire;
}

void FaultInjector::corrupt_state(ReplicaId replica, InstanceId seq, std::vector<std::string>& primary,
                                  std::vector<std::string>& shadow) {
    if (!targeted(replica) || !rng_.chance(config_.state_corrupt_prob)) return;
    const bool on_primary = rng_.below(2) == 0;
    auto& list = on_primary ? primary : shadow;
    auto action = rng_.below(3);
    // Removing from or mutating an empty list would change nothing.
    if (list.empty()) action = 1;
    std::string detail;
    switch (action) {
        case 0: {
            const auto at = rng_.below(list.size());
            list.erase(list.begin() + static_cast<std::ptrdiff_t>(at));
            detail = "removed element " + std::to_string(at);
            break;
        }
        case 1: {
            const auto at = rng_.below(list.size() + 1);
            list.insert(list.begin() + static_cast<std::ptrdiff_t>(at), random_text());
            detail = "inserted element at " + std::to_string(at);
            break;
        }
        default: {
            const auto at = rng_.below(list.size());
            auto& text = list[at];
            if (text.empty()) {
                text.push_back('#');
            } else {
                const auto ch = rng_.below(text.size());
                text[ch] = static_cast<char>(text[ch] == 'Z' ? 'Y' : 'Z');
            }
            detail = "changed string " + std::to_string(at);
            break;
        }
    }
    records_.push_back(InjectionRecord{FaultKind::state, replica, seq, 0, on_primary, !on_primary,
                                       std::string(on_primary ? "primary: " : "shadow: ") + detail});
}

bool FaultInjector::drop_transition(ReplicaId replica, InstanceId seq, Side side,
                                    const std::function<bool()>& would_change) {
    if (!targeted(replica) || !rng_.chance(config_.transition_drop_prob)) return false;
    if (!would_change()) return false;
    const bool primary = side == Side::primary;
    // Both sides suppressed in one transition form a single record.
    if (!records_.empty()) {
        auto& last = records_.back();
        if (last.kind == FaultKind::transition && last.replica == replica && last.seq == seq) {
            (primary ? last.primary : last.shadow) = true;
            last.detail = "suppressed primary and shadow";
            return true;
        }
    }
    records_.push_back(InjectionRecord{FaultKind::transition, replica, seq, 0, primary, !primary,
                                       primary ? "suppressed primary" : "suppressed shadow"});
    return true;
}

Bytes FaultInjector::corrupt_storage_read(ReplicaId replica, Bytes frame) {
    if (!targeted(replica) || frame.empty() || !rng_.chance(config_.storage_corrupt_prob)) return frame;
    const auto at = rng_.below(frame.size());
    frame[at] ^= static_cast<std::uint8_t>(1 + rng_.below(255));
    records_.push_back(InjectionRecord{FaultKind::storage, replica, std::nullopt, storage_ref_, false, false,
                                       "frame byte " + std::to_string(at)});
    return frame;
}

}  // namespace hpaxos
