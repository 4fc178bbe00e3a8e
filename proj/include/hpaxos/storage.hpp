#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "hpaxos/detection.hpp"
#include "hpaxos/messages.hpp"
#include "hpaxos/paxos.hpp"

namespace hpaxos {

class StorageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A non-trailing log record failed verification.
class StorageCorruption : public std::runtime_error {
public:
    StorageCorruption(std::size_t offset, const std::string& detail)
        : std::runtime_error(detail), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// The log verified record by record but its contents contradict each other.
class RecoveryError : public std::runtime_error {
public:
    RecoveryError(DetectionKind kind, std::optional<InstanceId> seq, const std::string& detail)
        : std::runtime_error(detail), kind_(kind), seq_(seq) {}
    DetectionKind kind() const { return kind_; }
    std::optional<InstanceId> seq() const { return seq_; }

private:
    DetectionKind kind_;
    std::optional<InstanceId> seq_;
};

/// Append-only byte store. Bytes passed to write() are durable only after
/// sync() returns.
class LogDevice {
public:
    virtual ~LogDevice() = default;
    virtual Bytes read_all() = 0;
    virtual void write(ByteView bytes) = 0;
    virtual void sync() = 0;
    /// Drops everything at and after `size` (used to cut a torn tail).
    virtual void truncate(std::size_t size) = 0;
    /// Forgets bytes written since the last sync, as a process crash would.
    virtual void drop_unsynced() = 0;
};

/// In-memory device for simulation.
class MemoryLogDevice final : public LogDevice {
public:
    Bytes read_all() override;
    void write(ByteView bytes) override;
    void sync() override;
    void truncate(std::size_t size) override;

    void drop_unsynced() override { unsynced_.clear(); }
    const Bytes& durable() const { return durable_; }
    /// Direct access to the "disk", for corruption tests.
    Bytes& durable_mut() { return durable_; }
    std::size_t unsynced_size() const { return unsynced_.size(); }

private:
    Bytes durable_;
    Bytes unsynced_;
};

/// One log file per replica. Writes are buffered until sync(), which writes
/// them out and optionally fsyncs.
class FileLogDevice final : public LogDevice {
public:
    FileLogDevice(std::filesystem::path path, bool fsync);
    ~FileLogDevice() override;
    FileLogDevice(const FileLogDevice&) = delete;
    FileLogDevice& operator=(const FileLogDevice&) = delete;

    Bytes read_all() override;
    void write(ByteView bytes) override;
    void sync() override;
    void truncate(std::size_t size) override;

    void drop_unsynced() override { unsynced_.clear(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    bool fsync_;
    int fd_ = -1;
    Bytes unsynced_;
};

struct ReplayResult {
    std::vector<Payload> payloads;
    /// Offset just past the last complete record.
    std::size_t valid_bytes = 0;
    bool torn_tail = false;
};

/// Per-frame seam between reading a record's bytes and verifying them.
using LogReadHook = std::function<Bytes(Bytes frame)>;

/// Write-ahead log of sealed envelopes. File layout is the concatenation of
/// envelope wire forms: [u32 BE length][body][u64 BE checksum]...
class WriteAheadLog {
public:
    explicit WriteAheadLog(std::shared_ptr<LogDevice> device) : device_(std::move(device)) {}

    void append(const Envelope& envelope);
    void append(const Payload& payload) { append(seal(payload)); }
    /// Flush barrier: everything appended so far is durable on return.
    void sync();

    /// Reads every record in append order. A torn final record is cut off;
    /// any other record that fails verification throws StorageCorruption.
    /// With validate=false checksums are ignored and an undecodable body
    /// throws DecodeError (the unhardened behaviour).
    ReplayResult replay(const LogReadHook& hook = {}, bool validate = true);

    LogDevice& device() { return *device_; }

private:
    std::shared_ptr<LogDevice> device_;
};

/// Splits raw log bytes into verified payloads without touching any device.
ReplayResult parse_log(ByteView bytes, const LogReadHook& hook = {}, bool validate = true);

/// Rebuilds acceptor, learner and proposer-round state from replayed
/// payloads. In strict mode contradictions (conflicting decisions, an applied
/// marker for an undecided instance) throw RecoveryError.
RecoveredState recover_state(const std::vector<Payload>& payloads, bool strict = true);

}  // namespace hpaxos
