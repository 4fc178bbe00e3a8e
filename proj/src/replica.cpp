#include "hpaxos/replica.hpp"

namespace hpaxos {

std::string_view to_string(Mode mode) { return mode == Mode::hardened ? "hardened" : "baseline"; }

std::string_view to_string(ReplicaStatus status) {
    switch (status) {
        case ReplicaStatus::running:
            return "running";
        case ReplicaStatus::halted:
            return "halted";
        case ReplicaStatus::crashed:
            return "crashed";
    }
    return "unknown";
}

Value encode_command(RequestId request, ByteView op) {
    Value out;
    out.reserve(8 + op.size());
    ByteWriter w(out);
    w.u64(request);
    w.raw(op);
    return out;
}

std::optional<Command> decode_command(ByteView value) {
    if (value.empty()) return std::nullopt;
    if (value.size() < 8) throw DecodeError("command shorter than request id");
    ByteReader r(value);
    Command c;
    c.request = r.u64();
    auto rest = r.raw(r.remaining());
    c.op.assign(rest.begin(), rest.end());
    return c;
}

std::uint64_t chain_checksum(ByteView encoded_state, std::uint64_t previous) {
    Bytes input(encoded_state.begin(), encoded_state.end());
    ByteWriter(input).u64(previous);
    return digest(input);
}

}  // namespace hpaxos
