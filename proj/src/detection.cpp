#include "hpaxos/detection.hpp"

#include <array>
#include <utility>

namespace hpaxos {
namespace {

constexpr std::array<std::pair<DetectionKind, std::string_view>, 6> kNames{{
    {DetectionKind::message_corruption, "MessageCorruption"},
    {DetectionKind::storage_corruption, "StorageCorruption"},
    {DetectionKind::state_divergence, "StateDivergence"},
    {DetectionKind::semantic_failure, "SemanticFailure"},
    {DetectionKind::digest_mismatch, "DigestMismatch"},
    {DetectionKind::conflicting_decision, "ConflictingDecision"},
}};

}  // namespace

std::string_view to_string(DetectionKind kind) {
    for (const auto& [k, name] : kNames) {
        if (k == kind) return name;
    }
    return "Unknown";
}

std::optional<DetectionKind> parse_detection_kind(std::string_view text) {
    for (const auto& [k, name] : kNames) {
        if (name == text) return k;
    }
    return std::nullopt;
}

}  // namespace hpaxos
