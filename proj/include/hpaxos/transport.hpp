#pragma once

#include <netinet/in.h>

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hpaxos/bytes.hpp"
#include "hpaxos/messages.hpp"
#include "hpaxos/rng.hpp"

namespace hpaxos {

struct NetDelivery {
    ReplicaId from = 0;
    ReplicaId to = 0;
    Bytes wire;
    friend bool operator==(const NetDelivery&, const NetDelivery&) = default;
};

/// Replicas in different groups cannot exchange messages during [start, end).
/// A replica listed in no group is isolated.
struct Partition {
    std::uint64_t start = 0;
    std::uint64_t end = 0;
    std::vector<std::set<ReplicaId>> groups;
};

struct NetConfig {
    std::uint64_t seed = 1;
    double drop_prob = 0.0;
    double dup_prob = 0.0;
    std::uint64_t delay_min = 1;
    std::uint64_t delay_max = 1;
    std::vector<Partition> partitions;

    /// Throws std::invalid_argument for out-of-range probabilities or min > max.
    void validate() const;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(ReplicaId from, ReplicaId to, const Bytes& wire) = 0;
    /// Envelopes that have arrived by virtual or wall time `now`.
    virtual std::vector<NetDelivery> poll(std::uint64_t now) = 0;
};

/// Deterministic simulated network over virtual ticks. It never alters bytes;
/// (seed, config, send sequence) fully determine the delivery trace.
class SimNetwork final : public Transport {
public:
    SimNetwork(NetConfig config, std::uint32_t cluster_size);

    void send(ReplicaId from, ReplicaId to, const Bytes& wire) override;
    /// Advances virtual time by one tick and returns everything due, in
    /// (due tick, send order) order.
    std::vector<NetDelivery> tick();
    std::vector<NetDelivery> poll(std::uint64_t now) override;

    std::uint64_t now() const { return now_; }
    bool partitioned(ReplicaId a, ReplicaId b, std::uint64_t at) const;
    std::size_t in_flight() const { return queue_.size(); }

    struct Stats {
        std::uint64_t sent = 0;
        std::uint64_t dropped = 0;
        std::uint64_t duplicated = 0;
        std::uint64_t delivered = 0;
    };
    const Stats& stats() const { return stats_; }

private:
    void schedule(ReplicaId from, ReplicaId to, const Bytes& wire);

    NetConfig config_;
    std::uint32_t cluster_size_;
    Rng rng_;
    std::uint64_t now_ = 0;
    std::uint64_t order_ = 0;
    std::map<std::pair<std::uint64_t, std::uint64_t>, NetDelivery> queue_;
    Stats stats_;
};

class SendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxDatagram = 60u * 1024u;

/// Real UDP transport. Each local replica owns a socket and a receiver thread
/// that feeds a queue; the queue is the only cross-thread state.
class UdpTransport final : public Transport {
public:
    /// `addresses[i]` is "host:port" for replica i; sockets are bound for the
    /// replicas in `local`.
    UdpTransport(const std::vector<std::string>& addresses, const std::set<ReplicaId>& local);
    ~UdpTransport() override;
    UdpTransport(const UdpTransport&) = delete;
    UdpTransport& operator=(const UdpTransport&) = delete;

    /// Best effort; throws SendError for envelopes above kMaxDatagram.
    void send(ReplicaId from, ReplicaId to, const Bytes& wire) override;
    std::vector<NetDelivery> poll(std::uint64_t now) override;

private:
    struct Endpoint;

    void receive_loop(Endpoint& endpoint);

    std::vector<sockaddr_in> peers_;
    std::vector<std::unique_ptr<Endpoint>> endpoints_;
    std::atomic<bool> stop_{false};
    std::mutex mutex_;
    std::deque<NetDelivery> inbox_;
};

}  // namespace hpaxos
