#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hpaxos/bytes.hpp"

namespace hpaxos {

using ReplicaId = std::uint32_t;
using InstanceId = std::uint64_t;
using Value = Bytes;

/// Voting-round identifier. Ordered lexicographically by (round, proposer), so
/// two proposers never issue equal ballots. The default ballot {0, 0} sorts
/// below every ballot a proposer can issue.
struct Ballot {
    std::uint64_t round = 0;
    ReplicaId proposer = 0;

    friend auto operator<=>(const Ballot&, const Ballot&) = default;
};

std::string to_string(const Ballot& b);

// Protocol payload bodies. Every payload is tagged with an instance and sender
// (see Payload); the meaning of the instance field for each body is noted.

/// Phase 1a. instance = first instance the ballot is claimed for; the claim
/// covers every instance >= it.
struct Prepare {
    Ballot ballot;
    friend bool operator==(const Prepare&, const Prepare&) = default;
};

struct PromiseEntry {
    InstanceId instance = 0;
    Ballot ballot;
    Value value;
    friend bool operator==(const PromiseEntry&, const PromiseEntry&) = default;
};

/// Phase 1b. instance = the Prepare's instance; `accepted` lists the sender's
/// accepted (ballot, value) for every instance >= it, ascending by instance.
struct Promise {
    Ballot ballot;
    std::vector<PromiseEntry> accepted;
    friend bool operator==(const Promise&, const Promise&) = default;
};

/// Phase 2a.
struct Propose {
    Ballot ballot;
    Value value;
    friend bool operator==(const Propose&, const Propose&) = default;
};

/// Phase 2b vote, broadcast to every learner.
struct Accepted {
    Ballot ballot;
    Value value;
    friend bool operator==(const Accepted&, const Accepted&) = default;
};

struct Decision {
    Value value;
    friend bool operator==(const Decision&, const Decision&) = default;
};

/// A client operation forwarded to the coordinator. instance is unused (0).
struct ClientRequest {
    Value value;
    friend bool operator==(const ClientRequest&, const ClientRequest&) = default;
};

/// Rolling state checksum after applying instance `instance`.
struct StateDigest {
    std::uint64_t checksum = 0;
    friend bool operator==(const StateDigest&, const StateDigest&) = default;
};

/// Ballot too low. Carries the acceptor's current promise.
struct Nack {
    Ballot promised;
    friend bool operator==(const Nack&, const Nack&) = default;
};

/// Liveness beacon. instance = sender's next undelivered instance.
struct Heartbeat {
    friend bool operator==(const Heartbeat&, const Heartbeat&) = default;
};

/// Catch-up request for decisions starting at instance.
struct DecisionRequest {
    friend bool operator==(const DecisionRequest&, const DecisionRequest&) = default;
};

/// Log-only marker: instance was applied; checksum is the rolling checksum after it.
struct Applied {
    std::uint64_t checksum = 0;
    friend bool operator==(const Applied&, const Applied&) = default;
};

using Body = std::variant<Prepare, Promise, Propose, Accepted, Decision, ClientRequest, StateDigest, Nack,
                          Heartbeat, DecisionRequest, Applied>;

struct Payload {
    InstanceId instance = 0;
    ReplicaId sender = 0;
    Body body;

    friend bool operator==(const Payload&, const Payload&) = default;

    template <typename T>
    bool is() const {
        return std::holds_alternative<T>(body);
    }
    template <typename T>
    const T& as() const {
        return std::get<T>(body);
    }
};

const char* body_name(const Body& body);

class CodecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class EncodeError : public CodecError {
public:
    using CodecError::CodecError;
};
class DecodeError : public CodecError {
public:
    using CodecError::CodecError;
};
class ChecksumMismatch : public CodecError {
public:
    using CodecError::CodecError;
};

inline constexpr std::size_t kMaxBodySize = 16u * 1024u * 1024u;
/// [u32 length] + [u64 checksum] around the body.
inline constexpr std::size_t kEnvelopeOverhead = 12;
/// tag + instance + sender
inline constexpr std::size_t kPayloadHeaderSize = 13;

/// Canonical big-endian encoding; throws EncodeError above kMaxBodySize.
Bytes encode(const Payload& payload);
/// Inverse of encode; throws DecodeError on truncation, unknown tag or trailing bytes.
Payload decode(ByteView bytes);

/// Checksum-sealed, immutable protocol message. Wire layout:
///   [u32 BE body_length][body][u64 BE xxh64(body)]
class Envelope {
public:
    /// Splits wire bytes into body and attached checksum without verifying the
    /// checksum. Throws DecodeError if the framing is inconsistent.
    static Envelope from_wire(ByteView wire);

    const Bytes& body() const { return body_; }
    std::uint64_t checksum() const { return checksum_; }
    Bytes wire() const;

    /// Re-verifies the checksum, then decodes.
    Payload payload() const;

    friend bool operator==(const Envelope&, const Envelope&) = default;

private:
    friend Envelope seal(const Payload& payload);

    Envelope(Bytes body, std::uint64_t checksum) : body_(std::move(body)), checksum_(checksum) {}

    Bytes body_;
    std::uint64_t checksum_ = 0;
};

Envelope seal(const Payload& payload);

/// Returns the payload iff digest(body) equals the attached checksum and the
/// body decodes. Throws ChecksumMismatch or DecodeError otherwise.
Payload verify(const Envelope& envelope);
Payload verify(ByteView wire);

/// Decodes the body while ignoring the attached checksum. This is the
/// unvalidated path used by baseline (unhardened) replicas.
Payload decode_unchecked(ByteView wire);

}  // namespace hpaxos
