#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hpaxos/messages.hpp"

namespace hpaxos {

enum class DetectionKind : std::uint8_t {
    message_corruption,
    storage_corruption,
    state_divergence,
    semantic_failure,
    digest_mismatch,
    conflicting_decision,
};

std::string_view to_string(DetectionKind kind);
std::optional<DetectionKind> parse_detection_kind(std::string_view text);

/// A failed validation. Every halt is preceded by exactly one of these; message
/// corruption events are the only ones that do not halt (the envelope is dropped).
struct DetectionEvent {
    DetectionKind kind = DetectionKind::message_corruption;
    ReplicaId replica = 0;
    std::optional<InstanceId> seq;
    std::string detail;
    /// Correlates with the injection that caused it (receive counter for
    /// message corruption), 0 when not applicable.
    std::uint64_t ref = 0;
};

/// Thrown by replica entry points once the replica has crash-stopped.
class Halted : public std::runtime_error {
public:
    explicit Halted(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hpaxos
