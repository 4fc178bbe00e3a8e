#include "hpaxos/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "hpaxos/digest.hpp"

namespace hpaxos {

Bytes MemoryLogDevice::read_all() {
    Bytes all = durable_;
    all.insert(all.end(), unsynced_.begin(), unsynced_.end());
    return all;
}

void MemoryLogDevice::write(ByteView bytes) { unsynced_.insert(unsynced_.end(), bytes.begin(), bytes.end()); }

void MemoryLogDevice::sync() {
    durable_.insert(durable_.end(), unsynced_.begin(), unsynced_.end());
    unsynced_.clear();
}

void MemoryLogDevice::truncate(std::size_t size) {
    sync();
    if (size < durable_.size()) durable_.resize(size);
}

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

FileLogDevice::FileLogDevice(std::filesystem::path path, bool fsync) : path_(std::move(path)), fsync_(fsync) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) throw StorageIoError(errno_text("open log"));
}

FileLogDevice::~FileLogDevice() {
    if (fd_ >= 0) ::close(fd_);
}

Bytes FileLogDevice::read_all() {
    Bytes out;
    std::uint8_t buf[1 << 16];
    if (::lseek(fd_, 0, SEEK_SET) < 0) throw StorageIoError(errno_text("seek log"));
    for (;;) {
        const auto n = ::read(fd_, buf, sizeof(buf));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw StorageIoError(errno_text("read log"));
        }
        if (n == 0) break;
        out.insert(out.end(), buf, buf + n);
    }
    out.insert(out.end(), unsynced_.begin(), unsynced_.end());
    return out;
}

void FileLogDevice::write(ByteView bytes) { unsynced_.insert(unsynced_.end(), bytes.begin(), bytes.end()); }

void FileLogDevice::sync() {
    std::size_t done = 0;
    while (done < unsynced_.size()) {
        const auto n = ::write(fd_, unsynced_.data() + done, unsynced_.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw StorageIoError(errno_text("write log"));
        }
        done += static_cast<std::size_t>(n);
    }
    unsynced_.clear();
    if (fsync_ && ::fdatasync(fd_) != 0) throw StorageIoError(errno_text("fdatasync log"));
}

void FileLogDevice::truncate(std::size_t size) {
    sync();
    if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) throw StorageIoError(errno_text("truncate log"));
}

void WriteAheadLog::append(const Envelope& envelope) { device_->write(envelope.wire()); }

void WriteAheadLog::sync() { device_->sync(); }

ReplayResult WriteAheadLog::replay(const LogReadHook& hook, bool validate) {
    const auto bytes = device_->read_all();
    auto result = parse_log(bytes, hook, validate);
    if (result.torn_tail) device_->truncate(result.valid_bytes);
    return result;
}

namespace {

std::uint32_t peek_u32(ByteView bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | bytes[at + i];
    return v;
}

std::uint64_t peek_u64(ByteView bytes, std::size_t at) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | bytes[at + i];
    return v;
}

// True if a checksum-valid frame starts anywhere in (from, end). A genuine torn
// tail is a prefix of a single frame and contains no such frame.
bool valid_frame_after(ByteView bytes, std::size_t from) {
    for (std::size_t at = from + 1; at + kEnvelopeOverhead <= bytes.size(); ++at) {
        const auto length = peek_u32(bytes, at);
        if (length > kMaxBodySize || at + kEnvelopeOverhead + length > bytes.size()) continue;
        const auto body = bytes.subspan(at + 4, length);
        if (digest(body) == peek_u64(bytes, at + 4 + length)) return true;
    }
    return false;
}

}  // namespace

ReplayResult parse_log(ByteView bytes, const LogReadHook& hook, bool validate) {
    ReplayResult result;
    std::size_t at = 0;
    while (at < bytes.size()) {
        const auto remaining = bytes.size() - at;
        bool incomplete = remaining < 4;
        std::uint32_t length = 0;
        if (!incomplete) {
            length = peek_u32(bytes, at);
            if (validate && length > kMaxBodySize) {
                throw StorageCorruption(at, "record length prefix exceeds limit at offset " + std::to_string(at));
            }
            incomplete = remaining < kEnvelopeOverhead + static_cast<std::size_t>(length);
        }
        if (incomplete) {
            if (validate && valid_frame_after(bytes, at)) {
                throw StorageCorruption(at, "record at offset " + std::to_string(at) + " overruns later records");
            }
            result.torn_tail = true;
            break;
        }

        const auto frame_size = kEnvelopeOverhead + length;
        Bytes frame(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                    bytes.begin() + static_cast<std::ptrdiff_t>(at + frame_size));
        if (hook) frame = hook(std::move(frame));

        if (validate) {
            try {
                result.payloads.push_back(verify(frame));
            } catch (const CodecError& e) {
                throw StorageCorruption(at, std::string("record at offset ") + std::to_string(at) + ": " + e.what());
            }
        } else {
            result.payloads.push_back(decode_unchecked(frame));
        }
        at += frame_size;
        result.valid_bytes = at;
    }
    return result;
}

RecoveredState recover_state(const std::vector<Payload>& payloads, bool strict) {
    RecoveredState state;
    for (const auto& p : payloads) {
        if (p.is<Prepare>()) {
            state.highest_round = std::max(state.highest_round, p.as<Prepare>().ballot.round);
        } else if (p.is<Promise>()) {
            const auto& ballot = p.as<Promise>().ballot;
            if (ballot > state.acceptor.promised) state.acceptor.promised = ballot;
        } else if (p.is<Accepted>()) {
            const auto& accepted = p.as<Accepted>();
            if (accepted.ballot > state.acceptor.promised) state.acceptor.promised = accepted.ballot;
            state.acceptor.accepted[p.instance] = AcceptedSlot{accepted.ballot, accepted.value};
        } else if (p.is<Decision>()) {
            const auto& value = p.as<Decision>().value;
            auto [it, inserted] = state.learner.decided.emplace(p.instance, value);
            if (!inserted && it->second != value) {
                if (strict) {
                    throw RecoveryError(DetectionKind::conflicting_decision, p.instance,
                                        "log holds two different decisions for instance " +
                                            std::to_string(p.instance));
                }
                it->second = value;
            }
        } else if (p.is<Applied>()) {
            if (strict && !state.learner.decided.contains(p.instance)) {
                throw RecoveryError(DetectionKind::storage_corruption, p.instance,
                                    "applied marker for undecided instance " + std::to_string(p.instance));
            }
            state.applied_checksums[p.instance] = p.as<Applied>().checksum;
            if (!state.applied_up_to || p.instance > *state.applied_up_to) state.applied_up_to = p.instance;
        }
    }
    state.highest_round = std::max(state.highest_round, state.acceptor.promised.round);

    if (state.applied_up_to) {
        if (strict) {
            for (InstanceId i = 0; i <= *state.applied_up_to; ++i) {
                if (!state.learner.decided.contains(i) || !state.applied_checksums.contains(i)) {
                    throw RecoveryError(DetectionKind::storage_corruption, i,
                                        "applied prefix has a hole at instance " + std::to_string(i));
                }
            }
        }
        state.learner.next_to_deliver = *state.applied_up_to + 1;
    }
    return state;
}

}  // namespace hpaxos
