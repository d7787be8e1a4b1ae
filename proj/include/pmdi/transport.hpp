// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <compare>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pmdi/bytes.hpp"

namespace pmdi {

enum class Role : std::uint8_t { Cloud = 0, Client = 1, Computing = 2, Garbler = 3, Evaluator = 4 };

/// Cluster indices are 1-based; `index` is the computing-server number v in [1, T].
struct PartyId {
  Role role = Role::Client;
  std::uint16_t cluster = 0;
  std::uint16_t index = 0;

  static PartyId cloud() { return {Role::Cloud, 0, 0}; }
  static PartyId client() { return {Role::Client, 0, 0}; }
  static PartyId computing(std::uint16_t j, std::uint16_t v) { return {Role::Computing, j, v}; }
  static PartyId garbler(std::uint16_t j) { return {Role::Garbler, j, 0}; }
  static PartyId evaluator(std::uint16_t j) { return {Role::Evaluator, j, 0}; }

  bool is_edge() const noexcept { return role == Role::Computing || role == Role::Garbler || role == Role::Evaluator; }
  /// "cloud", "client", "garbler[2]", "computing[2.1]", ...
  std::string to_string() const;
  static PartyId parse(const std::string& s);

  friend auto operator<=>(const PartyId&, const PartyId&) = default;
};

enum class Phase : std::uint8_t { Offline = 0, Online = 1 };
std::string to_string(Phase p);

enum class MsgKind : std::uint8_t {
  PublicKey = 0,       // client -> cloud
  EncMask = 1,         // client -> cloud: Enc(r_1) or Enc(r_{l+1})
  EncLinear = 2,       // cloud -> client: Enc(M_l c_l + s_l) at a nonlinear layer
  EncFinalMask = 3,    // cloud -> client: c_{L+1}^enc when the last layer is linear
  ModelShare = 4,      // cloud -> shareholder: [M_l]_v, [s_l]_v
  GarbledCircuit = 5,  // garbler -> evaluator
  OtChoice = 6,        // client -> garbler: i ^ b
  OtMaskedLabels = 7,  // garbler -> client
  OtSelected = 8,      // client -> evaluator: k_i ^ u_b
  MaskedInput = 9,     // client -> first garbler: x - r_1
  LayerInput = 10,     // garbler -> computing: x_l - c_l
  ShareProduct = 11,   // computing -> garbler: [M_l]_v (x_l - c_l) - [s_l]_v
  GarblerLabels = 12,  // garbler -> evaluator: labels of w
  EvalOutput = 13,     // evaluator -> garbler: x_{l+1} - r_{l+1}
  Handoff = 14,        // garbler_j -> garbler_{j+1}
  MaskedResult = 15,   // last garbler -> client
};
std::string to_string(MsgKind k);
MsgKind parse_msg_kind(const std::string& s);

struct MessageEnvelope {
  PartyId from;
  PartyId to;
  Phase phase = Phase::Offline;
  MsgKind kind = MsgKind::PublicKey;
  std::uint32_t session = 0;  // inference index
  std::uint32_t layer = 0;    // 1-based layer, 0 for setup
  std::uint64_t seq = 0;      // sender's Lamport clock; strictly increasing per channel
  Bytes payload;
};

/// Ledger-relevant metadata of one sent envelope.
struct SendRecord {
  PartyId from;
  PartyId to;
  Phase phase = Phase::Offline;
  MsgKind kind = MsgKind::PublicKey;
  std::uint32_t session = 0;
  std::uint32_t layer = 0;
  std::uint64_t seq = 0;
  std::uint64_t bytes = 0;

  static SendRecord of(const MessageEnvelope& env);
};
nlohmann::json send_log_to_json(const std::vector<SendRecord>& log);
std::vector<SendRecord> send_log_from_json(const nlohmann::json& j);

/// Fixed header: from(5) to(5) phase(1) kind(1) session(4) layer(4) seq(8), little-endian.
inline constexpr std::size_t kEnvelopeHeaderBytes = 28;
void write_party(ByteWriter& w, const PartyId& p);
PartyId read_party(ByteReader& r);
/// TCP frame: u32 LE length of (header + payload), header, payload.
Bytes encode_frame(const MessageEnvelope& env);
MessageEnvelope decode_frame_body(std::span<const std::uint8_t> body);

/// Unordered pair, stored with first < second.
struct PartyPair {
  PartyId first;
  PartyId second;
  static PartyPair of(const PartyId& a, const PartyId& b) { return a < b ? PartyPair{a, b} : PartyPair{b, a}; }
  std::string to_string() const;
  friend auto operator<=>(const PartyPair&, const PartyPair&) = default;
};

struct LedgerEntry {
  PartyPair pair;
  Phase phase;
  MsgKind kind;
  std::uint32_t layer;
  std::uint64_t bytes = 0;
  std::uint64_t messages = 0;
};

struct RoundEntry {
  PartyPair pair;
  Phase phase;
  std::uint32_t layer;
  std::uint64_t rounds = 0;  // summed over sessions
};

/// Immutable snapshot of a ledger.
class LedgerReport {
 public:
  LedgerReport() = default;
  LedgerReport(std::vector<LedgerEntry> entries, std::vector<RoundEntry> rounds, std::uint32_t sessions);

  const std::vector<LedgerEntry>& entries() const noexcept { return entries_; }
  const std::vector<RoundEntry>& round_entries() const noexcept { return rounds_; }
  std::uint32_t sessions() const noexcept { return sessions_; }
  bool empty() const noexcept { return entries_.empty(); }

  struct Filter {
    std::optional<PartyPair> pair;
    std::optional<Phase> phase;
    std::optional<MsgKind> kind;
    std::optional<std::uint32_t> layer;
    /// Matches any pair that includes this party.
    std::optional<PartyId> party;
    /// Matches pairs whose other end is an edge server (used with `party`).
    bool other_is_edge = false;
  };
  std::uint64_t bytes(const Filter& f) const;
  std::uint64_t messages(const Filter& f) const;
  /// Kind filter is ignored; rounds are per pair.
  std::uint64_t rounds(const Filter& f) const;

  nlohmann::json to_json() const;
  static LedgerReport from_json(const nlohmann::json& j);

 private:
  bool matches(const Filter& f, const PartyPair& pair, Phase phase, std::optional<MsgKind> kind,
               std::uint32_t layer) const;

  std::vector<LedgerEntry> entries_;
  std::vector<RoundEntry> rounds_;
  std::uint32_t sessions_ = 0;
};

/// Byte and round accounting. Bytes are payload bytes only; framing is excluded.
/// A round is a maximal run of same-direction messages on a pair within one
/// (phase, session, layer); a new round starts whenever the direction flips.
/// Thread-safe.
class TrafficLedger {
 public:
  void record(const SendRecord& rec);
  void record(const MessageEnvelope& env) { record(SendRecord::of(env)); }
  LedgerReport report() const;
  void clear();

 private:
  struct Key {
    PartyPair pair;
    Phase phase;
    MsgKind kind;
    std::uint32_t layer;
    friend auto operator<=>(const Key&, const Key&) = default;
  };
  struct RoundKey {
    PartyPair pair;
    Phase phase;
    std::uint32_t session;
    std::uint32_t layer;
    friend auto operator<=>(const RoundKey&, const RoundKey&) = default;
  };
  struct RoundState {
    PartyId last_from;
    std::uint64_t rounds = 0;
  };

  mutable std::mutex mu_;
  std::map<Key, std::pair<std::uint64_t, std::uint64_t>> cells_;
  std::map<RoundKey, RoundState> rounds_;
  std::map<std::uint32_t, bool> sessions_;
};

/// Replays send records in (seq, from) order into a fresh ledger. Used to merge
/// per-process send logs; Lamport ordering keeps direction flips causal.
LedgerReport replay_ledger(std::vector<SendRecord> sent);

/// Handler-side view of the network.
class Context {
 public:
  virtual ~Context() = default;
  virtual void send(const PartyId& to, Phase phase, MsgKind kind, std::uint32_t session, std::uint32_t layer,
                    Bytes payload) = 0;
  /// Accounts simulated compute time on the calling party (no-op on real transports).
  virtual void compute(double seconds) = 0;
  /// Simulated time on the sim transport, wall-clock seconds since start otherwise.
  virtual double now() const = 0;
};

using LocalEvent = std::function<void(Context&)>;

/// Message-driven state machine. A handler returns false when the message cannot
/// be processed yet (e.g. it depends on one still in flight from another party);
/// the message is parked and retried after every later message.
class Party {
 public:
  virtual ~Party() = default;
  virtual PartyId id() const = 0;

  /// Called by the network. Not reentrant; a party's messages are processed in order.
  void deliver(const MessageEnvelope& env, Context& ctx);
  /// Runs a local event, then retries parked messages.
  void run_local(const LocalEvent& event, Context& ctx);
  std::size_t parked() const noexcept { return parked_.size(); }
  /// True once the party expects no further messages. Used by multi-process runs.
  virtual bool finished() const { return false; }

 protected:
  virtual bool on_message(const MessageEnvelope& env, Context& ctx) = 0;

 private:
  void retry_parked(Context& ctx);

  std::deque<MessageEnvelope> parked_;
};

struct LatencyModel {
  double fixed_s = 0;           // per message
  double bytes_per_s = 0;       // 0 = infinite bandwidth
  double delay(std::size_t bytes) const noexcept {
    return fixed_s + (bytes_per_s > 0 ? static_cast<double>(bytes) / bytes_per_s : 0);
  }
};

class Network {
 public:
  virtual ~Network() = default;

  /// Registers a party. Throws std::invalid_argument on duplicate id.
  virtual void add(std::shared_ptr<Party> party) = 0;
  /// Schedules a local (non-network) event on a party, e.g. "start inference".
  virtual void post(const PartyId& party, LocalEvent event) = 0;
  /// Runs until no messages or events remain. Rethrows the first handler exception.
  virtual void run_until_quiescent() = 0;

  TrafficLedger& ledger() noexcept { return ledger_; }
  void record_transcript(bool on) { record_ = on; }
  /// Every envelope sent, in send order; only populated when recording.
  std::vector<MessageEnvelope> transcript() const;
  /// Metadata of every envelope sent through this network object.
  std::vector<SendRecord> send_log() const;

 protected:
  void on_send(const MessageEnvelope& env);

  TrafficLedger ledger_;
  bool record_ = false;
  mutable std::mutex transcript_mu_;
  std::vector<MessageEnvelope> transcript_;
  std::vector<SendRecord> send_log_;
};

/// Single-threaded discrete-event network; deterministic. Messages arrive after
/// LatencyModel::delay, never overtaking earlier messages on the same channel, and
/// parties are busy for the compute time they report. A busy party serves the
/// channel heads that have arrived lowest session first, local events before messages.
class SimNetwork final : public Network {
 public:
  explicit SimNetwork(LatencyModel latency = {}) : latency_(latency) {}

  void add(std::shared_ptr<Party> party) override;
  void post(const PartyId& party, LocalEvent event) override;
  void run_until_quiescent() override;

  /// Latest simulated time any party finished work.
  double makespan() const noexcept { return makespan_; }

 private:
  struct Event {
    double time;
    std::uint64_t order;
    std::optional<MessageEnvelope> env;
    LocalEvent local;
  };
  struct Channel {
    std::deque<Event> queue;
    double last_arrival = 0;
  };
  class SimContext;
  struct Slot {
    std::shared_ptr<Party> party;
    double free_at = 0;
    std::uint64_t clock = 0;
    std::map<std::optional<PartyId>, Channel> inbox;
    std::size_t pending = 0;
  };
  void enqueue(const PartyId& to, const std::optional<PartyId>& from, Event ev);

  LatencyModel latency_;
  std::map<PartyId, Slot> parties_;
  std::uint64_t order_ = 0;
  double post_time_ = 0;
  double makespan_ = 0;
};

/// One thread per party with in-memory inboxes.
class ThreadedNetwork final : public Network {
 public:
  ThreadedNetwork();
  ~ThreadedNetwork() override;

  void add(std::shared_ptr<Party> party) override;
  void post(const PartyId& party, LocalEvent event) override;
  void run_until_quiescent() override;

 private:
  class ThreadContext;
  struct Item {
    std::optional<MessageEnvelope> env;
    LocalEvent local;
  };
  struct Mailbox {
    std::shared_ptr<Party> party;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Item> items;
    std::uint64_t clock = 0;
    std::thread worker;
  };

  void enqueue(const PartyId& to, Item item);
  void worker_loop(Mailbox& box);
  void finish_one();

  std::map<PartyId, std::unique_ptr<Mailbox>> boxes_;
  std::mutex state_mu_;
  std::condition_variable idle_cv_;
  std::int64_t inflight_ = 0;
  bool stopping_ = false;
  std::exception_ptr error_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace pmdi
