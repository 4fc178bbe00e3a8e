#include "hpaxos/messages.hpp"

#include <sstream>

#include "hpaxos/digest.hpp"

namespace hpaxos {
namespace {

// Tags are the variant index plus one; 0 is never a valid tag.
constexpr std::uint8_t tag_of(const Body& body) { return static_cast<std::uint8_t>(body.index() + 1); }

void put_ballot(ByteWriter& w, const Ballot& b) {
    w.u64(b.round);
    w.u32(b.proposer);
}

Ballot get_ballot(ByteReader& r) {
    Ballot b;
    b.round = r.u64();
    b.proposer = r.u32();
    return b;
}

struct BodyEncoder {
    ByteWriter& w;

    void operator()(const Prepare& m) { put_ballot(w, m.ballot); }
    void operator()(const Promise& m) {
        put_ballot(w, m.ballot);
        w.u32(static_cast<std::uint32_t>(m.accepted.size()));
        for (const auto& e : m.accepted) {
            w.u64(e.instance);
            put_ballot(w, e.ballot);
            w.blob(e.value);
        }
    }
    void operator()(const Propose& m) {
        put_ballot(w, m.ballot);
        w.blob(m.value);
    }
    void operator()(const Accepted& m) {
        put_ballot(w, m.ballot);
        w.blob(m.value);
    }
    void operator()(const Decision& m) { w.blob(m.value); }
    void operator()(const ClientRequest& m) { w.blob(m.value); }
    void operator()(const StateDigest& m) { w.u64(m.checksum); }
    void operator()(const Nack& m) { put_ballot(w, m.promised); }
    void operator()(const Heartbeat&) {}
    void operator()(const DecisionRequest&) {}
    void operator()(const Applied& m) { w.u64(m.checksum); }
};

Body decode_body(std::uint8_t tag, ByteReader& r) {
    switch (tag) {
        case 1:
            return Prepare{get_ballot(r)};
        case 2: {
            Promise m;
            m.ballot = get_ballot(r);
            const auto count = r.u32();
            // Each entry needs at least 24 bytes; reject counts the input cannot hold.
            if (count > r.remaining() / 24) throw DecodeError("promise entry count exceeds input");
            m.accepted.reserve(count);
            for (std::uint32_t i = 0; i < count; ++i) {
                PromiseEntry e;
                e.instance = r.u64();
                e.ballot = get_ballot(r);
                e.value = r.blob(kMaxBodySize);
                m.accepted.push_back(std::move(e));
            }
            return m;
        }
        case 3: {
            Propose m;
            m.ballot = get_ballot(r);
            m.value = r.blob(kMaxBodySize);
            return m;
        }
        case 4: {
            Accepted m;
            m.ballot = get_ballot(r);
            m.value = r.blob(kMaxBodySize);
            return m;
        }
        case 5:
            return Decision{r.blob(kMaxBodySize)};
        case 6:
            return ClientRequest{r.blob(kMaxBodySize)};
        case 7:
            return StateDigest{r.u64()};
        case 8:
            return Nack{get_ballot(r)};
        case 9:
            return Heartbeat{};
        case 10:
            return DecisionRequest{};
        case 11:
            return Applied{r.u64()};
        default:
            throw DecodeError("unknown payload tag " + std::to_string(tag));
    }
}

}  // namespace

std::string to_string(const Ballot& b) {
    std::ostringstream out;
    out << "(" << b.round << "," << b.proposer << ")";
    return out.str();
}

const char* body_name(const Body& body) {
    static constexpr const char* kNames[] = {"Prepare",       "Promise", "Propose",   "Accepted",
                                             "Decision",      "ClientRequest", "StateDigest", "Nack",
                                             "Heartbeat",     "DecisionRequest", "Applied"};
    return kNames[body.index()];
}

Bytes encode(const Payload& payload) {
    Bytes out;
    ByteWriter w(out);
    w.u8(tag_of(payload.body));
    w.u64(payload.instance);
    w.u32(payload.sender);
    std::visit(BodyEncoder{w}, payload.body);
    if (out.size() > kMaxBodySize) throw EncodeError("payload body exceeds 16 MiB");
    return out;
}

Payload decode(ByteView bytes) {
    if (bytes.size() < kPayloadHeaderSize) throw DecodeError("payload shorter than header");
    try {
        ByteReader r(bytes);
        Payload p;
        const auto tag = r.u8();
        p.instance = r.u64();
        p.sender = r.u32();
        p.body = decode_body(tag, r);
        if (!r.done()) throw DecodeError("trailing bytes after payload");
        return p;
    } catch (const ByteReaderError& e) {
        throw DecodeError(e.what());
    }
}

Envelope Envelope::from_wire(ByteView wire) {
    if (wire.size() < kEnvelopeOverhead) throw DecodeError("envelope shorter than framing");
    ByteReader r(wire);
    const auto length = r.u32();
    if (length > kMaxBodySize) throw DecodeError("envelope body length exceeds 16 MiB");
    if (wire.size() != kEnvelopeOverhead + length) throw DecodeError("envelope length prefix disagrees with size");
    auto body = r.raw(length);
    const auto checksum = r.u64();
    return Envelope(Bytes(body.begin(), body.end()), checksum);
}

Bytes Envelope::wire() const {
    Bytes out;
    out.reserve(body_.size() + kEnvelopeOverhead);
    ByteWriter w(out);
    w.u32(static_cast<std::uint32_t>(body_.size()));
    w.raw(body_);
    w.u64(checksum_);
    return out;
}

Payload Envelope::payload() const { return verify(*this); }

Envelope seal(const Payload& payload) {
    auto body = encode(payload);
    const auto checksum = digest(body);
    return Envelope(std::move(body), checksum);
}

Payload verify(const Envelope& envelope) {
    if (digest(envelope.body()) != envelope.checksum()) throw ChecksumMismatch("envelope checksum mismatch");
    return decode(envelope.body());
}

Payload verify(ByteView wire) { return verify(Envelope::from_wire(wire)); }

Payload decode_unchecked(ByteView wire) { return decode(Envelope::from_wire(wire).body()); }

}  // namespace hpaxos
