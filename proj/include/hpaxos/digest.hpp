#pragma once

#include <cstdint>

#include "hpaxos/bytes.hpp"

namespace hpaxos {

/// XXH64 (seed 0 by default) over a byte range. This is the checksum sealed
/// onto envelopes and chained into the rolling state checksum.
std::uint64_t xxh64(ByteView data, std::uint64_t seed = 0);

inline std::uint64_t digest(ByteView data) { return xxh64(data, 0); }

}  // namespace hpaxos
