#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hpaxos {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(ByteView b) { return std::string(b.begin(), b.end()); }

// Big-endian appender used by every canonical encoding in the library.
class ByteWriter {
public:
    explicit ByteWriter(Bytes& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
    void u64(std::uint64_t v) {
        for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
    void raw(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }
    // u32 length prefix followed by the bytes.
    void blob(ByteView b) {
        u32(static_cast<std::uint32_t>(b.size()));
        raw(b);
    }

private:
    Bytes& out_;
};

class ByteReaderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Big-endian cursor over a byte view; throws ByteReaderError on truncation.
class ByteReader {
public:
    explicit ByteReader(ByteView in) : in_(in) {}

    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
        return v;
    }
    ByteView raw(std::size_t n) {
        need(n);
        auto view = in_.subspan(pos_, n);
        pos_ += n;
        return view;
    }
    Bytes blob(std::size_t limit) {
        const auto n = u32();
        if (n > limit) throw ByteReaderError("length prefix exceeds limit");
        auto view = raw(n);
        return Bytes(view.begin(), view.end());
    }

    std::size_t remaining() const { return in_.size() - pos_; }
    std::size_t position() const { return pos_; }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw ByteReaderError("truncated input");
    }

    ByteView in_;
    std::size_t pos_ = 0;
};

}  // namespace hpaxos
