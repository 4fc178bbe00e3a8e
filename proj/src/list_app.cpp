#include "hpaxos/list_app.hpp"

#include "hpaxos/digest.hpp"

namespace hpaxos {
namespace {

constexpr std::size_t kMaxText = 1u << 20;

}  // namespace

Bytes ListApp::encode_op(const Op& op) {
    Bytes out;
    ByteWriter w(out);
    w.u8(static_cast<std::uint8_t>(op.kind));
    w.u32(op.position);
    if (op.kind != OpKind::remove) w.blob(to_bytes(op.text));
    return out;
}

ListApp::Op ListApp::decode_op(ByteView bytes) {
    try {
        ByteReader r(bytes);
        Op op;
        const auto kind = r.u8();
        if (kind < 1 || kind > 3) throw DecodeError("unknown list op kind");
        op.kind = static_cast<OpKind>(kind);
        op.position = r.u32();
        if (op.kind != OpKind::remove) op.text = to_string(r.blob(kMaxText));
        if (!r.done()) throw DecodeError("trailing bytes after list op");
        return op;
    } catch (const ByteReaderError& e) {
        throw DecodeError(e.what());
    }
}

ListApp::Op ListApp::random_op(Rng& rng) {
    auto text = [&] {
        std::string s(8, 'a');
        for (auto& c : s) c = static_cast<char>('a' + rng.below(26));
        return s;
    };
    const auto roll = rng.below(4);
    const auto position = static_cast<std::uint32_t>(rng.next());
    if (roll < 2) return add(text(), position);
    if (roll == 2) return set(position, text());
    return remove(position);
}

void ListApp::execute(State& state, ByteView op_bytes) const {
    const auto op = decode_op(op_bytes);
    switch (op.kind) {
        case OpKind::add: {
            const auto at = op.position % (state.size() + 1);
            state.insert(state.begin() + static_cast<std::ptrdiff_t>(at), op.text);
            break;
        }
        case OpKind::remove:
            if (!state.empty()) state.erase(state.begin() + static_cast<std::ptrdiff_t>(op.position % state.size()));
            break;
        case OpKind::set:
            if (!state.empty()) state[op.position % state.size()] = op.text;
            break;
    }
}

Descriptor ListApp::describe(const State& state) const {
    const auto encoded = encode_state(state);
    Descriptor out;
    ByteWriter w(out);
    w.u64(digest(encoded));
    w.raw(encoded);
    return out;
}

bool ListApp::semantic_check(ByteView op_bytes, const Descriptor& before_desc, const State& after) const {
    const auto op = decode_op(op_bytes);
    if (before_desc.size() < 8) return false;
    const auto before = decode_state(ByteView(before_desc).subspan(8));
    switch (op.kind) {
        case OpKind::add: {
            if (after.size() != before.size() + 1) return false;
            return after[op.position % (before.size() + 1)] == op.text;
        }
        case OpKind::remove: {
            if (before.empty()) return after.empty();
            if (after.size() + 1 != before.size()) return false;
            const auto at = op.position % before.size();
            return at == after.size() || after[at] == before[at + 1];
        }
        case OpKind::set: {
            if (after.size() != before.size()) return false;
            return before.empty() || after[op.position % before.size()] == op.text;
        }
    }
    return false;
}

Bytes ListApp::encode_state(const State& state) const {
    Bytes out;
    ByteWriter w(out);
    w.u32(static_cast<std::uint32_t>(state.size()));
    for (const auto& s : state) w.blob(to_bytes(s));
    return out;
}

ListApp::State ListApp::decode_state(ByteView bytes) const {
    try {
        ByteReader r(bytes);
        const auto count = r.u32();
        if (count > r.remaining() / 4) throw DecodeError("list count exceeds input");
        State state;
        state.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) state.push_back(to_string(r.blob(kMaxText)));
        if (!r.done()) throw DecodeError("trailing bytes after list state");
        return state;
    } catch (const ByteReaderError& e) {
        throw DecodeError(e.what());
    }
}

}  // namespace hpaxos
