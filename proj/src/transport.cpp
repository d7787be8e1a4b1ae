// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/transport.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <stdexcept>
#include <tuple>

#include "pmdi/errors.hpp"

namespace pmdi {

namespace {

constexpr std::array<const char*, 5> kRoleNames = {"cloud", "client", "computing", "garbler", "evaluator"};

constexpr std::array<const char*, 16> kKindNames = {
    "public_key",   "enc_mask",    "enc_linear",    "enc_final_mask", "model_share",   "garbled_circuit",
    "ot_choice",    "ot_masked_labels", "ot_selected", "masked_input", "layer_input", "share_product",
    "garbler_labels", "eval_output", "handoff",     "masked_result"};

nlohmann::json pair_json(const PartyPair& p) { return {p.first.to_string(), p.second.to_string()}; }

PartyPair pair_from_json(const nlohmann::json& j) {
  return PartyPair::of(PartyId::parse(j.at(0).get<std::string>()), PartyId::parse(j.at(1).get<std::string>()));
}

Phase parse_phase(const std::string& s) {
  if (s == "offline") return Phase::Offline;
  if (s == "online") return Phase::Online;
  throw ConfigError("unknown phase '" + s + "'");
}

}  // namespace

std::string PartyId::to_string() const {
  const std::string base = kRoleNames.at(static_cast<std::size_t>(role));
  switch (role) {
    case Role::Cloud:
    case Role::Client:
      return base;
    case Role::Computing:
      return base + "[" + std::to_string(cluster) + "." + std::to_string(index) + "]";
    default:
      return base + "[" + std::to_string(cluster) + "]";
  }
}

PartyId PartyId::parse(const std::string& s) {
  const auto open = s.find('[');
  const std::string name = s.substr(0, open);
  std::size_t r = 0;
  while (r < kRoleNames.size() && name != kRoleNames[r]) ++r;
  if (r == kRoleNames.size()) throw ConfigError("unknown party '" + s + "'");
  PartyId id{static_cast<Role>(r), 0, 0};
  const bool indexed = id.role != Role::Cloud && id.role != Role::Client;
  if (!indexed) {
    if (open != std::string::npos) throw ConfigError("party '" + s + "' takes no index");
    return id;
  }
  if (open == std::string::npos || s.back() != ']') throw ConfigError("party '" + s + "' needs an index");
  const std::string inner = s.substr(open + 1, s.size() - open - 2);
  try {
    if (id.role == Role::Computing) {
      const auto dot = inner.find('.');
      if (dot == std::string::npos) throw ConfigError("computing party needs [cluster.index]");
      id.cluster = static_cast<std::uint16_t>(std::stoul(inner.substr(0, dot)));
      id.index = static_cast<std::uint16_t>(std::stoul(inner.substr(dot + 1)));
    } else {
      id.cluster = static_cast<std::uint16_t>(std::stoul(inner));
    }
  } catch (const std::logic_error&) {
    throw ConfigError("malformed party index in '" + s + "'");
  }
  if (id.cluster == 0) throw ConfigError("cluster indices start at 1");
  return id;
}

std::string to_string(Phase p) { return p == Phase::Offline ? "offline" : "online"; }

std::string to_string(MsgKind k) { return kKindNames.at(static_cast<std::size_t>(k)); }

MsgKind parse_msg_kind(const std::string& s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (s == kKindNames[i]) return static_cast<MsgKind>(i);
  }
  throw ConfigError("unknown message kind '" + s + "'");
}

std::string PartyPair::to_string() const { return first.to_string() + "<->" + second.to_string(); }

void write_party(ByteWriter& w, const PartyId& p) {
  w.u8(static_cast<std::uint8_t>(p.role));
  w.u16(p.cluster);
  w.u16(p.index);
}

PartyId read_party(ByteReader& r) {
  const auto role = r.u8();
  if (role >= kRoleNames.size()) throw ProtocolError("bad role tag on the wire");
  PartyId p{static_cast<Role>(role), 0, 0};
  p.cluster = r.u16();
  p.index = r.u16();
  return p;
}

Bytes encode_frame(const MessageEnvelope& env) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(kEnvelopeHeaderBytes + env.payload.size()));
  write_party(w, env.from);
  write_party(w, env.to);
  w.u8(static_cast<std::uint8_t>(env.phase));
  w.u8(static_cast<std::uint8_t>(env.kind));
  w.u32(env.session);
  w.u32(env.layer);
  w.u64(env.seq);
  w.bytes(env.payload);
  return std::move(w).take();
}

MessageEnvelope decode_frame_body(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  MessageEnvelope env;
  env.from = read_party(r);
  env.to = read_party(r);
  const auto phase = r.u8();
  const auto kind = r.u8();
  if (phase > 1) throw ProtocolError("bad phase tag on the wire");
  if (kind >= kKindNames.size()) throw ProtocolError("bad message kind on the wire");
  env.phase = static_cast<Phase>(phase);
  env.kind = static_cast<MsgKind>(kind);
  env.session = r.u32();
  env.layer = r.u32();
  env.seq = r.u64();
  const auto rest = r.bytes(r.remaining());
  env.payload.assign(rest.begin(), rest.end());
  return env;
}

// ---------------------------------------------------------------------------
// Ledger

LedgerReport::LedgerReport(std::vector<LedgerEntry> entries, std::vector<RoundEntry> rounds, std::uint32_t sessions)
    : entries_(std::move(entries)), rounds_(std::move(rounds)), sessions_(sessions) {}

bool LedgerReport::matches(const Filter& f, const PartyPair& pair, Phase phase, std::optional<MsgKind> kind,
                           std::uint32_t layer) const {
  if (f.pair && *f.pair != pair) return false;
  if (f.phase && *f.phase != phase) return false;
  if (f.kind && kind && *f.kind != *kind) return false;
  if (f.layer && *f.layer != layer) return false;
  if (f.party) {
    const PartyId* other = nullptr;
    if (pair.first == *f.party) {
      other = &pair.second;
    } else if (pair.second == *f.party) {
      other = &pair.first;
    } else {
      return false;
    }
    if (f.other_is_edge && !other->is_edge()) return false;
  }
  return true;
}

std::uint64_t LedgerReport::bytes(const Filter& f) const {
  std::uint64_t total = 0;
  for (const auto& e : entries_) {
    if (matches(f, e.pair, e.phase, e.kind, e.layer)) total += e.bytes;
  }
  return total;
}

std::uint64_t LedgerReport::messages(const Filter& f) const {
  std::uint64_t total = 0;
  for (const auto& e : entries_) {
    if (matches(f, e.pair, e.phase, e.kind, e.layer)) total += e.messages;
  }
  return total;
}

std::uint64_t LedgerReport::rounds(const Filter& f) const {
  std::uint64_t total = 0;
  for (const auto& e : rounds_) {
    if (matches(f, e.pair, e.phase, std::nullopt, e.layer)) total += e.rounds;
  }
  return total;
}

nlohmann::json LedgerReport::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : entries_) {
    entries.push_back({{"pair", pair_json(e.pair)},
                       {"phase", pmdi::to_string(e.phase)},
                       {"kind", pmdi::to_string(e.kind)},
                       {"layer", e.layer},
                       {"bytes", e.bytes},
                       {"messages", e.messages}});
  }
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& e : rounds_) {
    rounds.push_back({{"pair", pair_json(e.pair)},
                      {"phase", pmdi::to_string(e.phase)},
                      {"layer", e.layer},
                      {"rounds", e.rounds}});
  }
  return {{"sessions", sessions_}, {"entries", entries}, {"rounds", rounds}};
}

LedgerReport LedgerReport::from_json(const nlohmann::json& j) {
  std::vector<LedgerEntry> entries;
  for (const auto& e : j.at("entries")) {
    entries.push_back({pair_from_json(e.at("pair")), parse_phase(e.at("phase").get<std::string>()),
                       parse_msg_kind(e.at("kind").get<std::string>()), e.at("layer").get<std::uint32_t>(),
                       e.at("bytes").get<std::uint64_t>(), e.at("messages").get<std::uint64_t>()});
  }
  std::vector<RoundEntry> rounds;
  for (const auto& e : j.at("rounds")) {
    rounds.push_back({pair_from_json(e.at("pair")), parse_phase(e.at("phase").get<std::string>()),
                      e.at("layer").get<std::uint32_t>(), e.at("rounds").get<std::uint64_t>()});
  }
  return LedgerReport(std::move(entries), std::move(rounds), j.at("sessions").get<std::uint32_t>());
}

SendRecord SendRecord::of(const MessageEnvelope& env) {
  return {env.from, env.to, env.phase, env.kind, env.session, env.layer, env.seq, env.payload.size()};
}

nlohmann::json send_log_to_json(const std::vector<SendRecord>& log) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : log) {
    out.push_back({r.from.to_string(), r.to.to_string(), pmdi::to_string(r.phase), pmdi::to_string(r.kind), r.session,
                   r.layer, r.seq, r.bytes});
  }
  return out;
}

std::vector<SendRecord> send_log_from_json(const nlohmann::json& j) {
  std::vector<SendRecord> log;
  for (const auto& e : j) {
    log.push_back({PartyId::parse(e.at(0).get<std::string>()), PartyId::parse(e.at(1).get<std::string>()),
                   parse_phase(e.at(2).get<std::string>()), parse_msg_kind(e.at(3).get<std::string>()),
                   e.at(4).get<std::uint32_t>(), e.at(5).get<std::uint32_t>(), e.at(6).get<std::uint64_t>(),
                   e.at(7).get<std::uint64_t>()});
  }
  return log;
}

void TrafficLedger::record(const SendRecord& env) {
  const PartyPair pair = PartyPair::of(env.from, env.to);
  std::lock_guard lock(mu_);
  auto& cell = cells_[Key{pair, env.phase, env.kind, env.layer}];
  cell.first += env.bytes;
  cell.second += 1;
  auto& rs = rounds_[RoundKey{pair, env.phase, env.session, env.layer}];
  if (rs.rounds == 0 || rs.last_from != env.from) {
    ++rs.rounds;
    rs.last_from = env.from;
  }
  sessions_[env.session] = true;
}

LedgerReport TrafficLedger::report() const {
  std::lock_guard lock(mu_);
  std::vector<LedgerEntry> entries;
  entries.reserve(cells_.size());
  for (const auto& [k, v] : cells_) entries.push_back({k.pair, k.phase, k.kind, k.layer, v.first, v.second});
  std::map<std::tuple<PartyPair, Phase, std::uint32_t>, std::uint64_t> summed;
  for (const auto& [k, v] : rounds_) summed[{k.pair, k.phase, k.layer}] += v.rounds;
  std::vector<RoundEntry> rounds;
  for (const auto& [k, v] : summed) rounds.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), v});
  return LedgerReport(std::move(entries), std::move(rounds), static_cast<std::uint32_t>(sessions_.size()));
}

void TrafficLedger::clear() {
  std::lock_guard lock(mu_);
  cells_.clear();
  rounds_.clear();
  sessions_.clear();
}

LedgerReport replay_ledger(std::vector<SendRecord> sent) {
  std::stable_sort(sent.begin(), sent.end(), [](const SendRecord& a, const SendRecord& b) {
    return a.seq != b.seq ? a.seq < b.seq : a.from < b.from;
  });
  TrafficLedger ledger;
  for (const auto& env : sent) ledger.record(env);
  return ledger.report();
}

// ---------------------------------------------------------------------------
// Parties

void Party::deliver(const MessageEnvelope& env, Context& ctx) {
  if (!on_message(env, ctx)) {
    parked_.push_back(env);
    return;
  }
  retry_parked(ctx);
}

void Party::run_local(const LocalEvent& event, Context& ctx) {
  event(ctx);
  retry_parked(ctx);
}

void Party::retry_parked(Context& ctx) {
  bool progress = true;
  while (progress && !parked_.empty()) {
    progress = false;
    for (auto it = parked_.begin(); it != parked_.end();) {
      if (on_message(*it, ctx)) {
        it = parked_.erase(it);
        progress = true;
      } else {
        ++it;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Networks

std::vector<MessageEnvelope> Network::transcript() const {
  std::lock_guard lock(transcript_mu_);
  return transcript_;
}

std::vector<SendRecord> Network::send_log() const {
  std::lock_guard lock(transcript_mu_);
  return send_log_;
}

void Network::on_send(const MessageEnvelope& env) {
  ledger_.record(env);
  std::lock_guard lock(transcript_mu_);
  send_log_.push_back(SendRecord::of(env));
  if (record_) transcript_.push_back(env);
}

class SimNetwork::SimContext final : public Context {
 public:
  SimContext(SimNetwork& net, const PartyId& self, Slot& slot, double start)
      : net_(net), self_(self), slot_(slot), start_(start) {}

  void send(const PartyId& to, Phase phase, MsgKind kind, std::uint32_t session, std::uint32_t layer,
            Bytes payload) override {
    if (!net_.parties_.contains(to)) throw ProtocolError("send to unknown party " + to.to_string());
    MessageEnvelope env{self_, to, phase, kind, session, layer, ++slot_.clock, std::move(payload)};
    net_.on_send(env);
    const double arrive = now() + net_.latency_.delay(env.payload.size());
    net_.enqueue(to, self_, Event{arrive, 0, std::move(env), {}});
  }
  void compute(double seconds) override { busy_ += seconds; }
  double now() const override { return start_ + busy_; }

 private:
  SimNetwork& net_;
  PartyId self_;
  Slot& slot_;
  double start_;
  double busy_ = 0;
};

void SimNetwork::enqueue(const PartyId& to, const std::optional<PartyId>& from, Event ev) {
  Slot& slot = parties_.at(to);
  Channel& ch = slot.inbox[from];
  ev.time = std::max(ev.time, ch.last_arrival);
  ev.order = order_++;
  ch.last_arrival = ev.time;
  ch.queue.push_back(std::move(ev));
  ++slot.pending;
}

void SimNetwork::add(std::shared_ptr<Party> party) {
  const PartyId id = party->id();
  if (!parties_.contains(id)) {
    parties_[id].party = std::move(party);
    return;
  }
  throw std::invalid_argument("duplicate party " + id.to_string());
}

void SimNetwork::post(const PartyId& party, LocalEvent event) {
  if (!parties_.contains(party)) throw std::invalid_argument("post to unknown party " + party.to_string());
  enqueue(party, std::nullopt, Event{post_time_, 0, std::nullopt, std::move(event)});
}

void SimNetwork::run_until_quiescent() {
  for (;;) {
    // Party whose next piece of work starts earliest; ties go to the older event.
    Slot* slot = nullptr;
    PartyId who;
    double start = 0;
    std::uint64_t first_order = 0;
    for (auto& [id, s] : parties_) {
      if (s.pending == 0) continue;
      double earliest = 0;
      std::uint64_t order = 0;
      bool any = false;
      for (const auto& [from, ch] : s.inbox) {
        if (ch.queue.empty()) continue;
        const Event& head = ch.queue.front();
        if (!any || head.time < earliest || (head.time == earliest && head.order < order)) {
          earliest = head.time;
          order = head.order;
          any = true;
        }
      }
      const double st = std::max(earliest, s.free_at);
      if (!slot || st < start || (st == start && order < first_order)) {
        slot = &s;
        who = id;
        start = st;
        first_order = order;
      }
    }
    if (!slot) break;

    // Among arrived channel heads: local events first, then lowest session.
    Channel* pick = nullptr;
    for (auto& [from, ch] : slot->inbox) {
      if (ch.queue.empty() || ch.queue.front().time > start) continue;
      if (!pick) {
        pick = &ch;
        continue;
      }
      const Event& a = ch.queue.front();
      const Event& b = pick->queue.front();
      const auto key = [](const Event& e) {
        return std::make_tuple(e.env.has_value(), e.env ? e.env->session : 0U, e.time, e.order);
      };
      if (key(a) < key(b)) pick = &ch;
    }
    Event ev = std::move(pick->queue.front());
    pick->queue.pop_front();
    --slot->pending;

    SimContext ctx(*this, who, *slot, start);
    if (ev.env) {
      slot->clock = std::max(slot->clock, ev.env->seq);
      slot->party->deliver(*ev.env, ctx);
    } else {
      slot->party->run_local(ev.local, ctx);
    }
    slot->free_at = ctx.now();
    makespan_ = std::max(makespan_, slot->free_at);
    post_time_ = std::max(post_time_, ev.time);
  }
}

class ThreadedNetwork::ThreadContext final : public Context {
 public:
  ThreadContext(ThreadedNetwork& net, Mailbox& box) : net_(net), box_(box) {}

  void send(const PartyId& to, Phase phase, MsgKind kind, std::uint32_t session, std::uint32_t layer,
            Bytes payload) override {
    if (!net_.boxes_.contains(to)) throw ProtocolError("send to unknown party " + to.to_string());
    MessageEnvelope env{box_.party->id(), to, phase, kind, session, layer, ++box_.clock, std::move(payload)};
    net_.on_send(env);
    net_.enqueue(to, Item{std::move(env), {}});
  }
  void compute(double) override {}
  double now() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - net_.start_).count();
  }

 private:
  ThreadedNetwork& net_;
  Mailbox& box_;
};

ThreadedNetwork::ThreadedNetwork() : start_(std::chrono::steady_clock::now()) {}

ThreadedNetwork::~ThreadedNetwork() {
  {
    std::lock_guard lock(state_mu_);
    stopping_ = true;
  }
  for (auto& [id, box] : boxes_) {
    {
      std::lock_guard lock(box->mu);
    }
    box->cv.notify_all();
  }
  for (auto& [id, box] : boxes_) {
    if (box->worker.joinable()) box->worker.join();
  }
}

void ThreadedNetwork::add(std::shared_ptr<Party> party) {
  const PartyId id = party->id();
  if (boxes_.contains(id)) throw std::invalid_argument("duplicate party " + id.to_string());
  auto box = std::make_unique<Mailbox>();
  box->party = std::move(party);
  Mailbox& ref = *box;
  boxes_.emplace(id, std::move(box));
  ref.worker = std::thread([this, &ref] { worker_loop(ref); });
}

void ThreadedNetwork::post(const PartyId& party, LocalEvent event) {
  if (!boxes_.contains(party)) throw std::invalid_argument("post to unknown party " + party.to_string());
  enqueue(party, Item{std::nullopt, std::move(event)});
}

void ThreadedNetwork::enqueue(const PartyId& to, Item item) {
  {
    std::lock_guard lock(state_mu_);
    ++inflight_;
  }
  Mailbox& box = *boxes_.at(to);
  {
    std::lock_guard lock(box.mu);
    box.items.push_back(std::move(item));
  }
  box.cv.notify_one();
}

void ThreadedNetwork::finish_one() {
  std::lock_guard lock(state_mu_);
  if (--inflight_ == 0) idle_cv_.notify_all();
}

void ThreadedNetwork::worker_loop(Mailbox& box) {
  ThreadContext ctx(*this, box);
  for (;;) {
    Item item;
    {
      std::unique_lock lock(box.mu);
      box.cv.wait(lock, [&] {
        if (!box.items.empty()) return true;
        std::lock_guard state(state_mu_);
        return stopping_;
      });
      if (box.items.empty()) return;
      item = std::move(box.items.front());
      box.items.pop_front();
    }
    bool failed;
    {
      std::lock_guard state(state_mu_);
      failed = error_ != nullptr;
    }
    if (!failed) {
      try {
        if (item.env) {
          box.clock = std::max(box.clock, item.env->seq);
          box.party->deliver(*item.env, ctx);
        } else {
          box.party->run_local(item.local, ctx);
        }
      } catch (...) {
        std::lock_guard state(state_mu_);
        if (!error_) error_ = std::current_exception();
      }
    }
    finish_one();
  }
}

void ThreadedNetwork::run_until_quiescent() {
  std::unique_lock lock(state_mu_);
  idle_cv_.wait(lock, [&] { return inflight_ == 0; });
  if (error_) std::rethrow_exception(error_);
}

}  // namespace pmdi
