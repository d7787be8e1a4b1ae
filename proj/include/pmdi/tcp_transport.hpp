// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "pmdi/transport.hpp"

namespace pmdi {

struct TcpEndpoint {
  PartyId id;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0: ephemeral, only for parties hosted by this process
};

/// Framed TCP transport. One socket per communicating party pair; the smaller
/// PartyId initiates and announces itself with a 10-byte hello (own id, peer id).
/// Frames follow encode_frame(). Parties hosted in this process each run on their
/// own thread.
class TcpNetwork final : public Network {
 public:
  TcpNetwork(std::vector<TcpEndpoint> directory, std::vector<PartyPair> channels, double connect_timeout_s = 30);
  ~TcpNetwork() override;

  /// Hosts a party from the directory and starts listening for it.
  void add(std::shared_ptr<Party> party) override;
  void post(const PartyId& party, LocalEvent event) override;
  /// Opens every channel touching a hosted party. Blocks until all are up.
  void connect();
  /// Requires every directory party to be hosted here.
  void run_until_quiescent() override;
  /// Runs until every hosted party reports Party::finished(). Throws ProtocolError
  /// on timeout or when a handler fails.
  void run_until_finished(double timeout_s);

  std::uint16_t port_of(const PartyId& id) const;

 private:
  struct Host;
  struct Link;

  const TcpEndpoint& endpoint(const PartyId& id) const;
  void accept_loop(Host& host);
  void reader_loop(Link& link);
  void register_link(const PartyId& local, const PartyId& remote, int fd);
  void enqueue(Host& host, MessageEnvelope env, bool count);
  void worker_loop(Host& host);
  void finish_one();
  void write_frame(const PartyId& from, const MessageEnvelope& env);
  void shutdown_all();

  std::vector<TcpEndpoint> directory_;
  std::vector<PartyPair> channels_;
  double connect_timeout_s_;
  std::map<PartyId, std::unique_ptr<Host>> hosts_;
  std::mutex links_mu_;
  std::condition_variable links_cv_;
  std::map<std::pair<PartyId, PartyId>, std::unique_ptr<Link>> links_;  // (local, remote)
  std::mutex state_mu_;
  std::condition_variable state_cv_;
  std::int64_t inflight_ = 0;
  bool stopping_ = false;
  std::exception_ptr error_;
  std::chrono::steady_clock::time_point start_;
  bool shut_ = false;
};

}  // namespace pmdi
