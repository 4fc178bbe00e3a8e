#include "hpaxos/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace hpaxos {

void NetConfig::validate() const {
    auto probability = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0,1]");
    };
    probability(drop_prob, "drop_prob");
    probability(dup_prob, "dup_prob");
    if (delay_min > delay_max) throw std::invalid_argument("delay_min exceeds delay_max");
    for (const auto& p : partitions) {
        if (p.start > p.end) throw std::invalid_argument("partition interval is reversed");
    }
}

SimNetwork::SimNetwork(NetConfig config, std::uint32_t cluster_size)
    : config_(std::move(config)), cluster_size_(cluster_size), rng_(config_.seed) {
    config_.validate();
}

bool SimNetwork::partitioned(ReplicaId a, ReplicaId b, std::uint64_t at) const {
    for (const auto& p : config_.partitions) {
        if (at < p.start || at >= p.end) continue;
        bool together = false;
        for (const auto& group : p.groups) {
            if (group.contains(a) && group.contains(b)) together = true;
        }
        if (!together) return true;
    }
    return false;
}

void SimNetwork::schedule(ReplicaId from, ReplicaId to, const Bytes& wire) {
    const auto delay = rng_.between(config_.delay_min, config_.delay_max);
    const auto due = now_ + std::max<std::uint64_t>(delay, 1);
    queue_.emplace(std::make_pair(due, order_++), NetDelivery{from, to, wire});
}

void SimNetwork::send(ReplicaId from, ReplicaId to, const Bytes& wire) {
    ++stats_.sent;
    if (to >= cluster_size_ || from == to || partitioned(from, to, now_) || rng_.chance(config_.drop_prob)) {
        ++stats_.dropped;
        return;
    }
    schedule(from, to, wire);
    if (rng_.chance(config_.dup_prob)) {
        ++stats_.duplicated;
        schedule(from, to, wire);
    }
}

std::vector<NetDelivery> SimNetwork::tick() {
    ++now_;
    std::vector<NetDelivery> due;
    while (!queue_.empty() && queue_.begin()->first.first <= now_) {
        auto node = queue_.extract(queue_.begin());
        if (partitioned(node.mapped().from, node.mapped().to, now_)) {
            ++stats_.dropped;
            continue;
        }
        ++stats_.delivered;
        due.push_back(std::move(node.mapped()));
    }
    return due;
}

std::vector<NetDelivery> SimNetwork::poll(std::uint64_t now) {
    std::vector<NetDelivery> all;
    while (now_ < now) {
        auto batch = tick();
        all.insert(all.end(), std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
    }
    return all;
}

struct UdpTransport::Endpoint {
    ReplicaId id = 0;
    int fd = -1;
    std::thread receiver;
};

namespace {

sockaddr_in resolve(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("address must be host:port: " + address);
    const auto host = address.substr(0, colon);
    const auto port = std::stoi(address.substr(colon + 1));
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* info = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &info) != 0 || info == nullptr) {
        throw std::invalid_argument("cannot resolve " + host);
    }
    sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(info->ai_addr);
    ::freeaddrinfo(info);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    return addr;
}

}  // namespace

UdpTransport::UdpTransport(const std::vector<std::string>& addresses, const std::set<ReplicaId>& local)
{
    for (const auto& address : addresses) peers_.push_back(resolve(address));
    endpoints_.resize(addresses.size());
    for (auto id : local) {
        if (id >= addresses.size()) throw std::invalid_argument("local replica without address");
        auto endpoint = std::make_unique<Endpoint>();
        endpoint->id = id;
        endpoint->fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (endpoint->fd < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
        timeval timeout{0, 20000};
        ::setsockopt(endpoint->fd, SOL_SOCKET, SO_RCVTIMEO, &timeout, sizeof(timeout));
        const auto& addr = peers_[id];
        if (::bind(endpoint->fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
            const auto err = std::string("bind ") + addresses[id] + ": " + std::strerror(errno);
            ::close(endpoint->fd);
            throw std::runtime_error(err);
        }
        endpoints_[id] = std::move(endpoint);
    }
    for (auto& endpoint : endpoints_) {
        if (endpoint) endpoint->receiver = std::thread([this, e = endpoint.get()] { receive_loop(*e); });
    }
}

UdpTransport::~UdpTransport() {
    stop_ = true;
    for (auto& endpoint : endpoints_) {
        if (!endpoint) continue;
        if (endpoint->receiver.joinable()) endpoint->receiver.join();
        ::close(endpoint->fd);
    }
}

void UdpTransport::receive_loop(Endpoint& endpoint) {
    std::vector<std::uint8_t> buffer(kMaxDatagram + 1);
    while (!stop_) {
        sockaddr_in source{};
        socklen_t source_len = sizeof(source);
        const auto n = ::recvfrom(endpoint.fd, buffer.data(), buffer.size(), 0, reinterpret_cast<sockaddr*>(&source),
                                  &source_len);
        if (n <= 0) continue;
        // Unknown source addresses keep from = 0; replicas rely on the envelope's sender.
        ReplicaId from = 0;
        for (ReplicaId r = 0; r < peers_.size(); ++r) {
            if (peers_[r].sin_port == source.sin_port && peers_[r].sin_addr.s_addr == source.sin_addr.s_addr) {
                from = r;
                break;
            }
        }
        NetDelivery delivery{from, endpoint.id, Bytes(buffer.begin(), buffer.begin() + n)};
        std::lock_guard lock(mutex_);
        inbox_.push_back(std::move(delivery));
    }
}

void UdpTransport::send(ReplicaId from, ReplicaId to, const Bytes& wire) {
    if (wire.size() > kMaxDatagram) throw SendError("envelope exceeds datagram limit");
    if (from >= endpoints_.size() || !endpoints_[from] || to >= peers_.size()) return;
    const auto& addr = peers_[to];
    // Loss is part of the channel model; errors are ignored.
    (void)::sendto(endpoints_[from]->fd, wire.data(), wire.size(), 0, reinterpret_cast<const sockaddr*>(&addr),
                   sizeof(addr));
}

std::vector<NetDelivery> UdpTransport::poll(std::uint64_t) {
    std::lock_guard lock(mutex_);
    std::vector<NetDelivery> out(std::make_move_iterator(inbox_.begin()), std::make_move_iterator(inbox_.end()));
    inbox_.clear();
    return out;
}

}  // namespace hpaxos
