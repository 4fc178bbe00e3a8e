#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hpaxos/bytes.hpp"
#include "hpaxos/replica.hpp"
#include "hpaxos/rng.hpp"

namespace hpaxos {

/// Reference application: an ordered list of strings.
///
/// Operations carry a raw position that is reduced modulo the current size
/// (size + 1 for Add), so any op applies to any state. Remove and Set on an
/// empty list leave it unchanged. Op layout: [u8 kind][u32 position][blob]
/// where the blob (u32 length + bytes) is present for Add and Set only.
class ListApp {
public:
    using State = std::vector<std::string>;

    enum class OpKind : std::uint8_t { add = 1, remove = 2, set = 3 };

    struct Op {
        OpKind kind = OpKind::add;
        std::uint32_t position = 0;
        std::string text;
        friend bool operator==(const Op&, const Op&) = default;
    };

    static Bytes encode_op(const Op& op);
    static Op decode_op(ByteView bytes);
    static Op add(std::string text, std::uint32_t position) { return Op{OpKind::add, position, std::move(text)}; }
    static Op remove(std::uint32_t position) { return Op{OpKind::remove, position, {}}; }
    static Op set(std::uint32_t position, std::string text) { return Op{OpKind::set, position, std::move(text)}; }

    /// Random workload op: 50% add, 25% set, 25% remove, 8-letter strings.
    static Op random_op(Rng& rng);

    State initial() const { return {}; }
    void execute(State& state, ByteView op) const;
    /// xxh64 of the canonical encoding followed by the encoding itself.
    Descriptor describe(const State& state) const;
    bool semantic_check(ByteView op, const Descriptor& before, const State& after) const;
    /// [u32 count] then one length-prefixed string per element.
    Bytes encode_state(const State& state) const;
    State decode_state(ByteView bytes) const;
};

static_assert(StateMachine<ListApp>);

}  // namespace hpaxos
