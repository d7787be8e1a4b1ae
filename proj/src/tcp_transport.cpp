// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "pmdi/errors.hpp"

namespace pmdi {

namespace {

constexpr std::size_t kHelloBytes = 10;
constexpr std::uint32_t kMaxFrameBytes = 1U << 30;

bool read_exact(int fd, std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r == 0) return false;
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void write_exact(int fd, const std::uint8_t* data, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t r = ::send(fd, data + sent, n - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("tcp send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(r);
  }
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw ConfigError("bad IPv4 address '" + host + "'");
  return addr;
}

}  // namespace

struct TcpNetwork::Host {
  std::shared_ptr<Party> party;
  int listen_fd = -1;
  std::uint16_t port = 0;
  std::thread acceptor;
  std::mutex mu;
  std::condition_variable cv;
  struct Item {
    std::optional<MessageEnvelope> env;
    LocalEvent local;
  };
  std::deque<Item> items;
  std::uint64_t clock = 0;
  std::thread worker;
  bool finished = false;  // guarded by state_mu_
};

struct TcpNetwork::Link {
  PartyId local;
  PartyId remote;
  int fd = -1;
  std::mutex write_mu;
  std::thread reader;
};

class TcpContext final : public Context {
 public:
  TcpContext(std::function<void(const PartyId&, Phase, MsgKind, std::uint32_t, std::uint32_t, Bytes)> send,
             std::chrono::steady_clock::time_point start)
      : send_(std::move(send)), start_(start) {}

  void send(const PartyId& to, Phase phase, MsgKind kind, std::uint32_t session, std::uint32_t layer,
            Bytes payload) override {
    send_(to, phase, kind, session, layer, std::move(payload));
  }
  void compute(double) override {}
  double now() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::function<void(const PartyId&, Phase, MsgKind, std::uint32_t, std::uint32_t, Bytes)> send_;
  std::chrono::steady_clock::time_point start_;
};

TcpNetwork::TcpNetwork(std::vector<TcpEndpoint> directory, std::vector<PartyPair> channels, double connect_timeout_s)
    : directory_(std::move(directory)),
      channels_(std::move(channels)),
      connect_timeout_s_(connect_timeout_s),
      start_(std::chrono::steady_clock::now()) {}

TcpNetwork::~TcpNetwork() { shutdown_all(); }

const TcpEndpoint& TcpNetwork::endpoint(const PartyId& id) const {
  for (const auto& e : directory_) {
    if (e.id == id) return e;
  }
  throw ProtocolError("party " + id.to_string() + " is not in the directory");
}

std::uint16_t TcpNetwork::port_of(const PartyId& id) const {
  if (auto it = hosts_.find(id); it != hosts_.end()) return it->second->port;
  return endpoint(id).port;
}

void TcpNetwork::add(std::shared_ptr<Party> party) {
  const PartyId id = party->id();
  if (hosts_.contains(id)) throw std::invalid_argument("duplicate party " + id.to_string());
  const TcpEndpoint& ep = endpoint(id);
  auto host = std::make_unique<Host>();
  host->party = std::move(party);
  host->listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (host->listen_fd < 0) throw ProtocolError("socket() failed");
  const int one = 1;
  ::setsockopt(host->listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(ep.host, ep.port);
  if (::bind(host->listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string why = std::strerror(errno);
    ::close(host->listen_fd);
    throw ProtocolError("bind " + ep.host + ":" + std::to_string(ep.port) + " for " + id.to_string() + ": " + why);
  }
  if (::listen(host->listen_fd, 128) != 0) throw ProtocolError("listen() failed");
  socklen_t len = sizeof(addr);
  ::getsockname(host->listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
  host->port = ntohs(addr.sin_port);
  for (auto& e : directory_) {
    if (e.id == id) e.port = host->port;
  }
  Host& ref = *host;
  hosts_.emplace(id, std::move(host));
  ref.acceptor = std::thread([this, &ref] { accept_loop(ref); });
}

void TcpNetwork::post(const PartyId& party, LocalEvent event) {
  auto it = hosts_.find(party);
  if (it == hosts_.end()) throw std::invalid_argument("post to party not hosted here: " + party.to_string());
  {
    std::lock_guard lock(state_mu_);
    ++inflight_;
  }
  Host& host = *it->second;
  {
    std::lock_guard lock(host.mu);
    host.items.push_back({std::nullopt, std::move(event)});
  }
  host.cv.notify_one();
}

void TcpNetwork::accept_loop(Host& host) {
  for (;;) {
    const int fd = ::accept(host.listen_fd, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    std::array<std::uint8_t, kHelloBytes> hello{};
    if (!read_exact(fd, hello.data(), hello.size())) {
      ::close(fd);
      continue;
    }
    try {
      ByteReader r(hello);
      const PartyId from = read_party(r);
      const PartyId to = read_party(r);
      if (to != host.party->id()) throw ProtocolError("hello addressed to " + to.to_string());
      register_link(to, from, fd);
    } catch (...) {
      ::close(fd);
      std::lock_guard lock(state_mu_);
      if (!error_) error_ = std::current_exception();
      state_cv_.notify_all();
    }
  }
}

void TcpNetwork::register_link(const PartyId& local, const PartyId& remote, int fd) {
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  auto link = std::make_unique<Link>();
  link->local = local;
  link->remote = remote;
  link->fd = fd;
  Link& ref = *link;
  {
    std::lock_guard lock(links_mu_);
    if (links_.contains({local, remote})) {
      ::close(fd);
      throw ProtocolError("duplicate channel " + local.to_string() + " <-> " + remote.to_string());
    }
    links_.emplace(std::make_pair(local, remote), std::move(link));
    ref.reader = std::thread([this, &ref] { reader_loop(ref); });
  }
  links_cv_.notify_all();
}

void TcpNetwork::connect() {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(connect_timeout_s_);
  std::size_t expected = 0;
  for (const auto& ch : channels_) {
    const bool first_local = hosts_.contains(ch.first);
    const bool second_local = hosts_.contains(ch.second);
    expected += (first_local ? 1 : 0) + (second_local ? 1 : 0);
    if (!first_local) continue;
    const TcpEndpoint& peer = endpoint(ch.second);
    int fd = -1;
    for (;;) {
      fd = ::socket(AF_INET, SOCK_STREAM, 0);
      sockaddr_in addr = make_addr(peer.host, port_of(ch.second));
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) break;
      ::close(fd);
      if (std::chrono::steady_clock::now() > deadline) {
        throw ProtocolError("could not connect " + ch.first.to_string() + " to " + ch.second.to_string());
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    ByteWriter hello;
    write_party(hello, ch.first);
    write_party(hello, ch.second);
    write_exact(fd, hello.view().data(), hello.size());
    register_link(ch.first, ch.second, fd);
  }
  {
    std::unique_lock lock(links_mu_);
    if (!links_cv_.wait_until(lock, deadline, [&] { return links_.size() >= expected; })) {
      throw ProtocolError("timed out waiting for peers to connect");
    }
  }
  for (auto& [id, host] : hosts_) {
    Host& ref = *host;
    ref.worker = std::thread([this, &ref] { worker_loop(ref); });
  }
}

void TcpNetwork::reader_loop(Link& link) {
  for (;;) {
    std::array<std::uint8_t, 4> len_bytes{};
    if (!read_exact(link.fd, len_bytes.data(), 4)) return;
    const std::uint32_t len = static_cast<std::uint32_t>(len_bytes[0]) | (static_cast<std::uint32_t>(len_bytes[1]) << 8) |
                              (static_cast<std::uint32_t>(len_bytes[2]) << 16) |
                              (static_cast<std::uint32_t>(len_bytes[3]) << 24);
    try {
      if (len < kEnvelopeHeaderBytes || len > kMaxFrameBytes) throw ProtocolError("bad frame length");
      Bytes body(len);
      if (!read_exact(link.fd, body.data(), body.size())) throw ProtocolError("connection closed mid-frame");
      MessageEnvelope env = decode_frame_body(body);
      if (env.to != link.local || env.from != link.remote) throw ProtocolError("frame routed to the wrong channel");
      enqueue(*hosts_.at(link.local), std::move(env), !hosts_.contains(link.remote));
    } catch (...) {
      std::lock_guard lock(state_mu_);
      if (!error_) error_ = std::current_exception();
      state_cv_.notify_all();
      return;
    }
  }
}

void TcpNetwork::enqueue(Host& host, MessageEnvelope env, bool count) {
  if (count) {
    std::lock_guard lock(state_mu_);
    ++inflight_;
  }
  {
    std::lock_guard lock(host.mu);
    host.items.push_back({std::move(env), {}});
  }
  host.cv.notify_one();
}

void TcpNetwork::write_frame(const PartyId& from, const MessageEnvelope& env) {
  Link* link = nullptr;
  {
    std::lock_guard lock(links_mu_);
    auto it = links_.find({from, env.to});
    if (it == links_.end()) throw ProtocolError("no channel " + from.to_string() + " -> " + env.to.to_string());
    link = it->second.get();
  }
  const Bytes frame = encode_frame(env);
  std::lock_guard lock(link->write_mu);
  write_exact(link->fd, frame.data(), frame.size());
}

void TcpNetwork::finish_one() {
  std::lock_guard lock(state_mu_);
  --inflight_;
  state_cv_.notify_all();
}

void TcpNetwork::worker_loop(Host& host) {
  const PartyId self = host.party->id();
  TcpContext ctx(
      [this, &host, self](const PartyId& to, Phase phase, MsgKind kind, std::uint32_t session, std::uint32_t layer,
                          Bytes payload) {
        MessageEnvelope env{self, to, phase, kind, session, layer, ++host.clock, std::move(payload)};
        on_send(env);
        if (hosts_.contains(to)) {
          std::lock_guard lock(state_mu_);
          ++inflight_;
        }
        write_frame(self, env);
      },
      start_);
  {
    std::lock_guard lock(state_mu_);
    host.finished = host.party->finished();
    state_cv_.notify_all();
  }
  for (;;) {
    Host::Item item;
    {
      std::unique_lock lock(host.mu);
      host.cv.wait(lock, [&] {
        if (!host.items.empty()) return true;
        std::lock_guard state(state_mu_);
        return stopping_;
      });
      if (host.items.empty()) return;
      item = std::move(host.items.front());
      host.items.pop_front();
    }
    bool failed;
    {
      std::lock_guard state(state_mu_);
      failed = error_ != nullptr;
    }
    bool done = false;
    if (!failed) {
      try {
        if (item.env) {
          host.clock = std::max(host.clock, item.env->seq);
          host.party->deliver(*item.env, ctx);
        } else {
          host.party->run_local(item.local, ctx);
        }
        done = host.party->finished();
      } catch (...) {
        std::lock_guard state(state_mu_);
        if (!error_) error_ = std::current_exception();
      }
    }
    {
      std::lock_guard state(state_mu_);
      host.finished = done;
    }
    finish_one();
  }
}

void TcpNetwork::run_until_quiescent() {
  for (const auto& e : directory_) {
    if (!hosts_.contains(e.id)) throw ProtocolError("run_until_quiescent needs every party in this process");
  }
  std::unique_lock lock(state_mu_);
  state_cv_.wait(lock, [&] { return inflight_ == 0 || error_ != nullptr; });
  if (error_) std::rethrow_exception(error_);
}

void TcpNetwork::run_until_finished(double timeout_s) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  std::unique_lock lock(state_mu_);
  const bool ok = state_cv_.wait_until(lock, deadline, [&] {
    if (error_) return true;
    if (inflight_ > 0) return false;
    for (const auto& [id, host] : hosts_) {
      if (!host->finished) return false;
    }
    return true;
  });
  if (error_) std::rethrow_exception(error_);
  if (!ok) throw ProtocolError("timed out waiting for parties to finish");
}

void TcpNetwork::shutdown_all() {
  if (shut_) return;
  shut_ = true;
  {
    std::lock_guard lock(state_mu_);
    stopping_ = true;
  }
  for (auto& [id, host] : hosts_) {
    {
      std::lock_guard lock(host->mu);
    }
    host->cv.notify_all();
  }
  for (auto& [id, host] : hosts_) {
    if (host->worker.joinable()) host->worker.join();
  }
  for (auto& [id, host] : hosts_) {
    if (host->listen_fd >= 0) ::shutdown(host->listen_fd, SHUT_RDWR);
    if (host->acceptor.joinable()) host->acceptor.join();
    if (host->listen_fd >= 0) ::close(host->listen_fd);
  }
  std::lock_guard lock(links_mu_);
  for (auto& [key, link] : links_) ::shutdown(link->fd, SHUT_WR);
  for (auto& [key, link] : links_) {
    if (link->reader.joinable()) link->reader.join();
    ::close(link->fd);
  }
}

}  // namespace pmdi
