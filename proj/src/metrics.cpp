// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace pmdi::metrics {

std::string to_string(Link l) {
  switch (l) {
    case Link::CloudClient:
      return "CS-C";
    case Link::ClientEdge:
      return "C-ES";
    case Link::EdgeEdge:
      return "ES-ES";
  }
  return "?";
}

std::string to_string(Component c) { return c == Component::Linear ? "linear" : "nonlinear"; }

const CostCell* CostPrediction::find(Link link, Phase phase, Component component) const {
  for (const auto& c : cells) {
    if (c.link == link && c.phase == phase && c.component == component) return &c;
  }
  return nullptr;
}

nlohmann::json CostPrediction::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : cells) {
    out.push_back({{"scheme", c.scheme},
                   {"link", to_string(c.link)},
                   {"phase", pmdi::to_string(c.phase)},
                   {"component", to_string(c.component)},
                   {"rounds", c.rounds},
                   {"bits", c.bits},
                   {"rounds_expr", c.rounds_expr},
                   {"bits_expr", c.bits_expr}});
  }
  return out;
}

CostPrediction predict_pmdi(const CostParams& p) {
  const double h2 = p.h * p.h;
  CostPrediction out;
  out.cells = {
      {"privateMDI", Link::CloudClient, Phase::Offline, Component::Linear, 2, 2 * p.N_enc, "2", "2 N_enc"},
      {"privateMDI", Link::ClientEdge, Phase::Offline, Component::NonLinear, 6, 2 * p.N * (2 * p.kappa + 1), "6",
       "2N(2 kappa + 1)"},
      {"privateMDI", Link::EdgeEdge, Phase::Offline, Component::NonLinear, 1, p.gc_bits, "1", "|GC|"},
      {"privateMDI", Link::EdgeEdge, Phase::Online, Component::Linear, 2, (h2 * p.i + h2 * p.o) * p.N, "2",
       "(h^2 i + h^2 o) N"},
      {"privateMDI", Link::EdgeEdge, Phase::Online, Component::NonLinear, 1, p.N * p.kappa, "1", "N kappa"},
  };
  if (p.n <= 0) {
    for (auto& c : out.cells) {
      if (c.component == Component::NonLinear) c.rounds = c.bits = 0;
    }
  }
  return out;
}

CostPrediction predict_baselines(const CostParams& p) {
  const double h2 = p.h * p.h;
  const double g2 = p.g * p.g;
  CostPrediction out;
  out.cells = {
      {"Delphi", Link::CloudClient, Phase::Offline, Component::Linear, 2, 2 * p.N_enc, "2", "2 N_enc"},
      {"Delphi", Link::CloudClient, Phase::Offline, Component::NonLinear, 3, p.gc_bits + 2 * p.N * p.kappa, "3",
       "|GC| + 2 N kappa"},
      {"Delphi", Link::CloudClient, Phase::Online, Component::Linear, 2, 2 * p.N, "2", "2N"},
      {"Delphi", Link::CloudClient, Phase::Online, Component::NonLinear, 1, p.N * p.kappa, "1", "N kappa"},
      {"SecureNN", Link::EdgeEdge, Phase::Online, Component::Linear, 2,
       (h2 * g2 * p.i + 2 * g2 * p.o * p.i + h2 * p.o) * p.N, "2", "(h^2 g^2 i + 2 g^2 o i + h^2 o) N"},
      {"SecureNN", Link::EdgeEdge, Phase::Online, Component::NonLinear, 10, (8 * std::log2(p.p) + 24) * p.N, "10",
       "(8 log p + 24) N"},
      {"Falcon", Link::EdgeEdge, Phase::Online, Component::Linear, 1, h2 * p.o * p.N, "1", "(h^2 o) N"},
      {"Falcon", Link::EdgeEdge, Phase::Online, Component::NonLinear, 5 + std::log2(p.N), 0.5 * p.N, "5 + log N",
       "0.5 N"},
  };
  return out;
}

CostParams params_for_layer(const RunFacts& run, std::size_t layer) {
  const auto& l = run.shape.layers.at(layer - 1);
  CostParams p;
  p.N = run.shape.ring.bit_width;
  p.N_enc = 8.0 * static_cast<double>(run.he_element_bytes);
  p.kappa = run.kappa;
  p.gc_bits = 8.0 * static_cast<double>(run.gc_unit_bytes);
  p.n = l.has_nonlinear() ? static_cast<double>(l.rows) : 0.0;
  p.h = 1;
  p.g = 1;
  p.i = static_cast<double>(l.cols);
  p.o = static_cast<double>(l.rows);
  p.T = static_cast<double>(run.colluding);
  p.P = static_cast<double>(run.allocation.cluster_count());
  return p;
}

std::uint64_t bits_to_bytes(double bits) { return static_cast<std::uint64_t>(std::ceil(bits / 8.0)); }

bool DiscrepancyReport::crisp_ok() const {
  for (const auto& r : rows) {
    if (r.crisp && !r.match) return false;
  }
  return true;
}

nlohmann::json DiscrepancyReport::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = {{"cell", r.cell},       {"pair", r.pair},   {"phase", pmdi::to_string(r.phase)},
                        {"layer", r.layer},     {"crisp", r.crisp}, {"match", r.match},
                        {"measured_bytes", r.measured_bytes}, {"note", r.note}};
    j["predicted_bytes"] = r.predicted_bytes ? nlohmann::json(*r.predicted_bytes) : nlohmann::json(nullptr);
    j["predicted_rounds"] = r.predicted_rounds ? nlohmann::json(*r.predicted_rounds) : nlohmann::json(nullptr);
    j["measured_rounds"] = r.measured_rounds ? nlohmann::json(*r.measured_rounds) : nlohmann::json(nullptr);
    out.push_back(std::move(j));
  }
  return out;
}

std::string DiscrepancyReport::table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-48s %-7s %5s %14s %14s %8s %8s %s\n", "cell", "phase", "layer", "pred bytes",
                "meas bytes", "pred rds", "meas rds", "status");
  os << line;
  for (const auto& r : rows) {
    const std::string pb = r.predicted_bytes ? std::to_string(*r.predicted_bytes) : "-";
    std::string pr = "-";
    if (r.predicted_rounds) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", *r.predicted_rounds);
      pr = buf;
    }
    const std::string mr = r.measured_rounds ? std::to_string(*r.measured_rounds) : "-";
    const char* status = r.match ? "match" : (r.crisp ? "MISMATCH" : "delta");
    std::snprintf(line, sizeof(line), "%-48s %-7s %5u %14s %14llu %8s %8s %s\n", r.cell.c_str(),
                  pmdi::to_string(r.phase).c_str(), r.layer, pb.c_str(),
                  static_cast<unsigned long long>(r.measured_bytes), pr.c_str(), mr.c_str(), status);
    os << line;
  }
  return os.str();
}

DiscrepancyReport compare(const RunFacts& run, const LedgerReport& ledger) {
  using Filter = LedgerReport::Filter;
  DiscrepancyReport rep;
  const std::uint64_t S = run.sessions;
  const std::size_t L = run.shape.layers.size();
  const unsigned N = run.shape.ring.bit_width;
  const PartyId client = PartyId::client();
  const PartyId cloud = PartyId::cloud();

  {
    Comparison c;
    c.cell = "CS-C online (none)";
    c.pair = PartyPair::of(client, cloud).to_string();
    c.phase = Phase::Online;
    c.predicted_bytes = 0;
    c.measured_bytes = ledger.bytes(Filter{.pair = PartyPair::of(client, cloud), .phase = Phase::Online});
    c.crisp = true;
    c.match = c.measured_bytes == 0;
    rep.rows.push_back(c);
  }
  {
    Comparison c;
    c.cell = "cloud online, any peer (none)";
    c.pair = "cloud<->*";
    c.phase = Phase::Online;
    c.predicted_bytes = 0;
    c.measured_bytes = ledger.bytes(Filter{.phase = Phase::Online, .party = cloud});
    c.crisp = true;
    c.match = c.measured_bytes == 0;
    rep.rows.push_back(c);
  }

  // Initial CS-C exchange: Enc(r_1) up, then the first ciphertext the cloud returns.
  std::size_t first_nl = 0;
  for (std::size_t l = 1; l <= L; ++l) {
    if (run.shape.layers[l - 1].has_nonlinear()) {
      first_nl = l;
      break;
    }
  }
  const std::size_t reply_layer = first_nl ? first_nl : L;
  const MsgKind reply_kind = first_nl ? MsgKind::EncLinear : MsgKind::EncFinalMask;
  {
    const auto pair = PartyPair::of(client, cloud);
    Comparison c;
    c.cell = "CS-C offline initial exchange (2 / 2N_enc)";
    c.pair = pair.to_string();
    c.phase = Phase::Offline;
    const std::uint64_t per_session =
        (run.shape.input_dim + run.shape.layers[reply_layer - 1].rows) * run.he_element_bytes;
    c.predicted_bytes = S * per_session;
    const Filter up{.pair = pair, .phase = Phase::Offline, .kind = MsgKind::EncMask, .layer = 0};
    const Filter down{.pair = pair,
                      .phase = Phase::Offline,
                      .kind = reply_kind,
                      .layer = static_cast<std::uint32_t>(reply_layer)};
    c.measured_bytes = ledger.bytes(up) + ledger.bytes(down);
    c.predicted_rounds = 2.0 * static_cast<double>(S);
    c.measured_rounds = ledger.messages(up) + ledger.messages(down);
    c.crisp = true;
    c.match = c.measured_bytes == *c.predicted_bytes && *c.measured_rounds == 2 * S;
    c.note = "N_enc = " + std::to_string(8 * run.he_element_bytes) + " bits per element, length prefix included";
    rep.rows.push_back(c);
  }

  for (std::size_t l = 1; l <= L; ++l) {
    const auto& layer = run.shape.layers[l - 1];
    const auto j = static_cast<std::uint16_t>(run.allocation.cluster_of(l) + 1);
    const CostPrediction pred = predict_pmdi(params_for_layer(run, l));
    const auto lt = static_cast<std::uint32_t>(l);
    const PartyId g = PartyId::garbler(j);
    const PartyId e = PartyId::evaluator(j);

    if (run.colluding > 0) {
      const CostCell* cell = pred.find(Link::EdgeEdge, Phase::Online, Component::Linear);
      Comparison c;
      c.cell = "ES-ES online linear ((h^2 i + h^2 o) N)";
      c.pair = g.to_string() + "<->computing[" + std::to_string(j) + ".*]";
      c.phase = Phase::Online;
      c.layer = lt;
      c.predicted_bytes = S * run.colluding * bits_to_bytes(cell->bits);
      c.predicted_rounds = cell->rounds * static_cast<double>(S * run.colluding);
      std::uint64_t bytes = 0;
      std::uint64_t rounds = 0;
      for (std::size_t v = 1; v <= run.colluding; ++v) {
        const auto pair = PartyPair::of(g, PartyId::computing(j, static_cast<std::uint16_t>(v)));
        bytes += ledger.bytes(Filter{.pair = pair, .phase = Phase::Online, .layer = lt});
        rounds += ledger.rounds(Filter{.pair = pair, .phase = Phase::Online, .layer = lt});
      }
      c.measured_bytes = bytes;
      c.measured_rounds = rounds;
      c.match = bytes == *c.predicted_bytes && static_cast<double>(rounds) == *c.predicted_rounds;
      c.note = "per computing server";
      rep.rows.push_back(c);
    }

    if (!layer.has_nonlinear()) continue;
    const auto ge = PartyPair::of(g, e);
    {
      const CostCell* cell = pred.find(Link::EdgeEdge, Phase::Online, Component::NonLinear);
      Comparison c;
      c.cell = "ES-ES online nonlinear labels (N kappa)";
      c.pair = ge.to_string();
      c.phase = Phase::Online;
      c.layer = lt;
      c.predicted_bytes = S * bits_to_bytes(static_cast<double>(layer.rows) * cell->bits);
      c.measured_bytes = ledger.bytes(Filter{.pair = ge, .phase = Phase::Online, .kind = MsgKind::GarblerLabels, .layer = lt});
      c.crisp = true;
      c.match = c.measured_bytes == *c.predicted_bytes;
      rep.rows.push_back(c);
    }
    {
      const CostCell* cell = pred.find(Link::EdgeEdge, Phase::Online, Component::NonLinear);
      Comparison c;
      c.cell = "ES-ES online nonlinear round trip";
      c.pair = ge.to_string();
      c.phase = Phase::Online;
      c.layer = lt;
      c.measured_bytes = ledger.bytes(Filter{.pair = ge, .phase = Phase::Online, .layer = lt});
      c.predicted_rounds = cell->rounds * static_cast<double>(S);
      c.measured_rounds = ledger.rounds(Filter{.pair = ge, .phase = Phase::Online, .layer = lt});
      c.match = static_cast<double>(*c.measured_rounds) == *c.predicted_rounds;
      c.note = "includes the evaluator's reply x_{l+1} - r_{l+1} (n N bits), which the N kappa cell omits";
      rep.rows.push_back(c);
    }
    {
      const CostCell* cell = pred.find(Link::EdgeEdge, Phase::Offline, Component::NonLinear);
      Comparison c;
      c.cell = "ES-ES offline nonlinear (|GC|)";
      c.pair = ge.to_string();
      c.phase = Phase::Offline;
      c.layer = lt;
      c.predicted_bytes = S * layer.rows * bits_to_bytes(cell->bits);
      c.measured_bytes = ledger.bytes(Filter{.pair = ge, .phase = Phase::Offline, .kind = MsgKind::GarbledCircuit, .layer = lt});
      c.predicted_rounds = cell->rounds * static_cast<double>(S);
      c.measured_rounds = ledger.rounds(Filter{.pair = ge, .phase = Phase::Offline, .layer = lt});
      c.crisp = true;
      c.match = c.measured_bytes == *c.predicted_bytes;
      c.note = "|GC| = " + std::to_string(8 * run.gc_unit_bytes) + " bits per element";
      rep.rows.push_back(c);
    }
    {
      const CostCell* cell = pred.find(Link::ClientEdge, Phase::Offline, Component::NonLinear);
      const auto cg = PartyPair::of(client, g);
      const auto ce = PartyPair::of(client, e);
      Comparison c;
      c.cell = "C-ES offline nonlinear OT (6 / 2N(2 kappa + 1))";
      c.pair = "client<->{" + g.to_string() + "," + e.to_string() + "}";
      c.phase = Phase::Offline;
      c.layer = lt;
      c.predicted_bytes = S * bits_to_bytes(static_cast<double>(layer.rows) * cell->bits);
      c.measured_bytes = ledger.bytes(Filter{.pair = cg, .phase = Phase::Offline, .layer = lt}) +
                         ledger.bytes(Filter{.pair = ce, .phase = Phase::Offline, .layer = lt});
      c.predicted_rounds = cell->rounds * static_cast<double>(S);
      c.measured_rounds = ledger.rounds(Filter{.pair = cg, .phase = Phase::Offline, .layer = lt}) +
                          ledger.rounds(Filter{.pair = ce, .phase = Phase::Offline, .layer = lt});
      c.match = c.measured_bytes == *c.predicted_bytes && static_cast<double>(*c.measured_rounds) == *c.predicted_rounds;
      const std::uint64_t choice_bytes = (layer.rows * 2 * N + 7) / 8;
      const std::uint64_t label_bytes = layer.rows * 2 * N * ((run.kappa + 7) / 8);
      c.note = "batched: 3 messages per layer (choice bits " + std::to_string(choice_bytes) + " B, masked labels " +
               std::to_string(2 * label_bytes) + " B, selected labels " + std::to_string(label_bytes) +
               " B) plus an 8-byte session id each";
      rep.rows.push_back(c);
    }
    {
      const auto pair = PartyPair::of(client, cloud);
      Comparison c;
      c.cell = "CS-C offline mask refresh (2 / 2N_enc)";
      c.pair = pair.to_string();
      c.phase = Phase::Offline;
      c.layer = lt;
      c.predicted_bytes = S * 2 * layer.rows * run.he_element_bytes;
      c.measured_bytes = ledger.bytes(Filter{.pair = pair, .phase = Phase::Offline, .layer = lt});
      c.predicted_rounds = 2.0 * static_cast<double>(S);
      c.measured_rounds = ledger.rounds(Filter{.pair = pair, .phase = Phase::Offline, .layer = lt});
      c.match = c.measured_bytes == *c.predicted_bytes && static_cast<double>(*c.measured_rounds) == *c.predicted_rounds;
      c.note = "Enc(M_l c_l + s_l) down, Enc(r_{l+1}) up";
      rep.rows.push_back(c);
    }
  }
  return rep;
}

nlohmann::json metrics_json(const RunFacts& run, const LedgerReport& ledger, const DiscrepancyReport& report,
                            double offline_seconds, double online_seconds) {
  using Filter = LedgerReport::Filter;
  nlohmann::json alloc = nlohmann::json::array();
  for (std::size_t j = 0; j < run.allocation.ranges.size(); ++j) {
    const auto& r = run.allocation.ranges[j];
    alloc.push_back({{"cluster", j + 1}, {"first_layer", r.first}, {"last_layer", r.last}, {"params", r.params}});
  }
  std::size_t headline_layer = 1;
  for (std::size_t l = 1; l <= run.shape.layers.size(); ++l) {
    if (run.shape.layers[l - 1].has_nonlinear()) {
      headline_layer = l;
      break;
    }
  }
  const CostParams headline = params_for_layer(run, headline_layer);
  const auto pair = PartyPair::of(PartyId::client(), PartyId::cloud());
  return {{"schema", 1},
          {"run",
           {{"sessions", run.sessions},
            {"kappa", run.kappa},
            {"colluding", run.colluding},
            {"clusters", run.allocation.cluster_count()},
            {"ring_bits", run.shape.ring.bit_width},
            {"n_enc_bits", 8 * run.he_element_bytes},
            {"gc_unit_bits", 8 * run.gc_unit_bytes}}},
          {"allocation", alloc},
          {"online_client_cloud_bytes", ledger.bytes(Filter{.pair = pair, .phase = Phase::Online})},
          {"online_cloud_bytes", ledger.bytes(Filter{.phase = Phase::Online, .party = PartyId::cloud()})},
          {"crisp_ok", report.crisp_ok()},
          {"comparison", report.to_json()},
          {"predictions",
           {{"layer", headline_layer},
            {"privatemdi", predict_pmdi(headline).to_json()},
            {"baselines", predict_baselines(headline).to_json()}}},
          {"timing", {{"offline_seconds", offline_seconds}, {"online_seconds", online_seconds}}},
          {"ledger", ledger.to_json()}};
}

}  // namespace pmdi::metrics
