// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: genmodel, oracle, run, verify, predict.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmdi/config.hpp"
#include "pmdi/errors.hpp"
#include "pmdi/metrics.hpp"
#include "pmdi/model.hpp"
#include "pmdi/protocol.hpp"
#include "pmdi/tcp_transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pmdi;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitProtocol = 3;
constexpr int kExitVerify = 4;

struct Overrides {
  std::string config;
  std::string model;
  std::string party;
  std::string transport;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunConfig load_config(const Overrides& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  RunConfig c = RunConfig::load(o.config);
  if (!o.model.empty()) {
    c.model_path = fs::path(o.model);
    c.preset.reset();
  }
  if (o.seed) c.seed = *o.seed;
  if (!o.transport.empty()) c.transport = parse_transport(o.transport);
  if (!o.out.empty()) c.out_dir = o.out;
  c.validate();
  return c;
}

json outputs_json(const std::vector<RingVector>& outputs, const ModelSpec& model, const std::string& source) {
  const unsigned f = model.output_frac_bits();
  json raw = json::array();
  json decoded = json::array();
  for (const auto& v : outputs) {
    raw.push_back(std::vector<std::uint64_t>(v.values().begin(), v.values().end()));
    json d = json::array();
    for (std::uint64_t x : v.values()) d.push_back(std::ldexp(static_cast<double>(ring::to_signed(model.ring, x)), -static_cast<int>(f)));
    decoded.push_back(std::move(d));
  }
  return {{"schema", 1},
          {"source", source},
          {"ring", {{"bit_width", model.ring.bit_width}, {"frac_bits", model.ring.frac_bits}}},
          {"output_frac_bits", f},
          {"sessions", outputs.size()},
          {"outputs", raw},
          {"decoded", decoded}};
}

std::vector<TcpEndpoint> tcp_directory(const RunConfig& c) {
  std::vector<TcpEndpoint> dir;
  std::uint16_t port = c.base_port;
  for (const auto& id : protocol_parties(c.clusters, c.colluding)) dir.push_back({id, "127.0.0.1", port++});
  return dir;
}

fs::path party_file(const fs::path& out, const PartyId& id, const char* suffix) {
  return out / "parties" / (id.to_string() + suffix);
}

std::size_t gc_unit_bytes(const RunContext& rc) {
  if (!rc.circuit) return 0;
  Prg probe(seed_from_u64(0), 0);
  return gc::garble(*rc.circuit, probe, rc.config.kappa).unit.byte_size();
}

void emit_reports(const RunConfig& c, const ModelSpec& model, const RunContext& rc, const std::vector<RingVector>& outputs,
                  const LedgerReport& ledger, std::size_t he_element_bytes, double offline_s, double online_s,
                  const std::string& transport) {
  metrics::RunFacts facts;
  facts.shape = rc.shape;
  facts.allocation = rc.allocation;
  facts.kappa = c.kappa;
  facts.colluding = c.colluding;
  facts.he_element_bytes = he_element_bytes;
  facts.gc_unit_bytes = gc_unit_bytes(rc);
  facts.sessions = static_cast<std::uint32_t>(outputs.size());
  const auto report = metrics::compare(facts, ledger);

  json result = outputs_json(outputs, model, "protocol");
  result["transport"] = transport;
  write_json(c.out_dir / "result.json", result);
  write_json(c.out_dir / "metrics.json", metrics::metrics_json(facts, ledger, report, offline_s, online_s));
  write_json(c.out_dir / "ledger.json", ledger.to_json());
  std::cout << report.table();
  std::cout << "online client<->cloud bytes: "
            << ledger.bytes({.pair = PartyPair::of(PartyId::client(), PartyId::cloud()), .phase = Phase::Online})
            << "\n";
  if (!report.crisp_ok()) throw ProtocolError("crisp cost cells do not match the measured ledger");
}

/// One party of a multi-process TCP run.
int run_single_party(const RunConfig& c, const std::string& party_name) {
  const PartyId id = PartyId::parse(party_name);
  const ModelSpec model = c.load_model();
  Deployment d(model, c.protocol());
  auto party = d.make_party(id);
  TcpNetwork net(tcp_directory(c), protocol_channels(c.clusters, c.colluding));
  net.add(party);
  net.connect();

  const auto inputs = c.inputs(model);
  const auto S = static_cast<std::uint32_t>(inputs.size());
  auto* client = id.role == Role::Client ? static_cast<ClientParty*>(party.get()) : nullptr;
  if (client) {
    for (std::uint32_t t = 0; t < S; ++t) {
      net.post(id, [client, t](Context& ctx) { client->start_offline(t, ctx); });
    }
    for (std::uint32_t t = 0; t < S; ++t) {
      net.post(id, [client, t, x = inputs[t]](Context& ctx) { client->submit_input(t, x, ctx); });
    }
  }
  net.run_until_finished(600);
  write_json(party_file(c.out_dir, id, ".sendlog.json"), send_log_to_json(net.send_log()));
  if (client) {
    json j;
    json outs = json::array();
    double first = 0;
    double last = 0;
    for (std::uint32_t t = 0; t < S; ++t) {
      auto r = client->result(t);
      if (!r) throw ProtocolError("no result for session " + std::to_string(t));
      outs.push_back(std::vector<std::uint64_t>(r->values().begin(), r->values().end()));
      const auto tm = *client->timing(t);
      first = t == 0 ? tm.first : std::min(first, tm.first);
      last = std::max(last, tm.second);
    }
    j["outputs"] = outs;
    j["he_element_bytes"] = client->public_key().element_bytes();
    j["online_seconds"] = last - first;
    write_json(party_file(c.out_dir, id, ".result.json"), j);
  }
  return 0;
}

/// Launches one child process per party and merges their send logs.
int run_tcp_multiprocess(const RunConfig& c, const std::string& self) {
  fs::create_directories(c.out_dir / "parties");
  const fs::path cfg_path = fs::absolute(c.out_dir / "run-config.json");
  json cj = c.to_json();
  if (c.model_path) cj["model"] = fs::absolute(*c.model_path).string();
  cj["out"] = fs::absolute(c.out_dir).string();
  write_json(cfg_path, cj);

  const auto parties = protocol_parties(c.clusters, c.colluding);
  std::vector<pid_t> children;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& id : parties) {
    const std::string name = id.to_string();
    const pid_t pid = fork();
    if (pid < 0) throw ProtocolError("fork failed");
    if (pid == 0) {
      execl(self.c_str(), self.c_str(), "run", "--config", cfg_path.c_str(), "--party", name.c_str(),
            static_cast<char*>(nullptr));
      _exit(127);
    }
    children.push_back(pid);
  }
  bool ok = true;
  for (pid_t pid : children) {
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ok = false;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!ok) throw ProtocolError("a party process failed");

  std::vector<SendRecord> merged;
  for (const auto& id : parties) {
    auto log = send_log_from_json(read_json(party_file(c.out_dir, id, ".sendlog.json")));
    merged.insert(merged.end(), log.begin(), log.end());
  }
  const LedgerReport ledger = replay_ledger(std::move(merged));
  const json cr = read_json(party_file(c.out_dir, PartyId::client(), ".result.json"));

  const ModelSpec model = c.load_model();
  Deployment d(model, c.protocol());
  std::vector<RingVector> outputs;
  for (const auto& o : cr.at("outputs")) outputs.emplace_back(model.ring, o.get<std::vector<std::uint64_t>>());
  const double online = cr.at("online_seconds").get<double>();
  emit_reports(c, model, *d.context(), outputs, ledger, cr.at("he_element_bytes").get<std::size_t>(), wall - online,
               online, "tcp");
  return 0;
}

int cmd_run(const Overrides& o, const std::string& self) {
  const RunConfig c = load_config(o);
  if (!o.party.empty()) return run_single_party(c, o.party);
  if (c.transport == TransportKind::Tcp) return run_tcp_multiprocess(c, self);

  const ModelSpec model = c.load_model();
  Deployment d(model, c.protocol());
  RunOptions opts;
  opts.transport = c.transport;
  opts.latency = c.latency();
  opts.pipelined = c.pipelined;
  const RunResult r = run_protocol(d, c.inputs(model), opts);
  emit_reports(c, model, *d.context(), r.outputs, r.ledger, r.he_element_bytes, r.offline_seconds, r.online_seconds,
               to_string(c.transport));
  return 0;
}

int cmd_oracle(const Overrides& o) {
  const RunConfig c = load_config(o);
  const ModelSpec model = c.load_model();
  std::vector<RingVector> outputs;
  for (const auto& x : c.inputs(model)) outputs.push_back(oracle_infer(model, x));
  write_json(c.out_dir / "oracle.json", outputs_json(outputs, model, "oracle"));
  std::cout << "oracle: " << outputs.size() << " outputs written to " << (c.out_dir / "oracle.json").string() << "\n";
  return 0;
}

int cmd_verify(const std::vector<std::string>& results, const std::vector<std::string>& oracles) {
  if (results.empty() || results.size() != oracles.size()) {
    throw ConfigError("verify needs matching --result and --oracle lists");
  }
  bool all = true;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const json a = read_json(results[k]);
    const json b = read_json(oracles[k]);
    const bool same = a.at("outputs") == b.at("outputs") && a.at("ring") == b.at("ring");
    std::cout << (same ? "PASS " : "FAIL ") << results[k] << " vs " << oracles[k] << "\n";
    all = all && same;
  }
  return all ? 0 : kExitVerify;
}

int cmd_genmodel(const std::string& preset, const std::vector<std::size_t>& dims,
                 const std::vector<std::string>& acts, std::uint64_t seed, unsigned bits, unsigned frac,
                 double scale, const std::string& out) {
  ModelGenOptions opts;
  if (!preset.empty()) {
    const auto& p = find_preset(preset);
    opts.dims = p.dims;
    opts.activations = p.activations;
  } else {
    opts.dims = dims;
    for (const auto& a : acts) opts.activations.push_back(gc::parse_activation(a));
  }
  opts.ring = {bits, frac};
  opts.ring.validate();
  opts.seed = seed;
  opts.weight_scale = scale;
  const ModelSpec m = generate_model(opts);
  const fs::path path = out.empty() ? fs::path("model.json") : fs::path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_model(m, path);
  std::cout << "wrote " << path.string() << ": " << m.layer_count() << " layers, " << m.total_params()
            << " parameters\n";
  return 0;
}

int cmd_predict(const metrics::CostParams& p, bool as_json) {
  const auto mine = metrics::predict_pmdi(p);
  const auto base = metrics::predict_baselines(p);
  if (as_json) {
    std::cout << json{{"privatemdi", mine.to_json()}, {"baselines", base.to_json()}}.dump(2) << "\n";
    return 0;
  }
  char line[256];
  std::snprintf(line, sizeof(line), "%-11s %-6s %-8s %-10s %10s %14s  %s\n", "scheme", "link", "phase", "component",
                "rounds", "bits", "formula");
  std::cout << line;
  for (const auto* pred : {&mine, &base}) {
    for (const auto& cell : pred->cells) {
      std::snprintf(line, sizeof(line), "%-11s %-6s %-8s %-10s %10g %14g  %s / %s\n", cell.scheme.c_str(),
                    metrics::to_string(cell.link).c_str(), to_string(cell.phase).c_str(),
                    metrics::to_string(cell.component).c_str(), cell.rounds, cell.bits, cell.rounds_expr.c_str(),
                    cell.bits_expr.c_str());
      std::cout << line;
    }
  }
  return 0;
}

std::string self_path(const char* argv0) {
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? std::string(argv0) : p.string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privatemdi: private inference across a client, a cloud server and edge clusters"};
  app.require_subcommand(1);

  Overrides o;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run-config JSON")->required();
    sub->add_option("--model", o.model, "Model JSON, overrides the config");
    sub->add_option("--seed", o.seed, "Protocol seed, overrides the config");
    sub->add_option("--out", o.out, "Output directory, overrides the config");
  };

  auto* run = app.add_subcommand("run", "Run the protocol and write result.json, metrics.json and ledger.json");
  add_common(run);
  run->add_option("--transport", o.transport, "sim, threaded or tcp")->check(CLI::IsMember({"sim", "threaded", "tcp"}));
  run->add_option("--party", o.party, "Host a single party of a TCP run, e.g. garbler[1]");

  auto* oracle = app.add_subcommand("oracle", "Plaintext reference inference, writes oracle.json");
  add_common(oracle);

  std::vector<std::string> results;
  std::vector<std::string> oracles;
  auto* verify = app.add_subcommand("verify", "Compare protocol results against oracle results");
  verify->add_option("--result", results, "result.json files")->required();
  verify->add_option("--oracle", oracles, "oracle.json files, paired with --result")->required();

  std::string preset;
  std::vector<std::size_t> dims;
  std::vector<std::string> acts;
  std::uint64_t gen_seed = 1;
  unsigned bits = 32;
  unsigned frac = 12;
  double scale = 1.0;
  std::string gen_out;
  auto* gen = app.add_subcommand("genmodel", "Generate a random quantized model");
  gen->add_option("--preset", preset, "Named architecture");
  gen->add_option("--dims", dims, "Input dim then each layer's output dim")->delimiter(',');
  gen->add_option("--activations", acts, "One per layer: relu or none")->delimiter(',');
  gen->add_option("--seed", gen_seed, "Weight seed");
  gen->add_option("--bit-width", bits, "Ring bit width N");
  gen->add_option("--frac-bits", frac, "Fractional bits f");
  gen->add_option("--weight-scale", scale, "Weight range multiplier");
  gen->add_option("--out", gen_out, "Output model path");
  gen->add_flag_function("--list", [](std::int64_t) {
    for (const auto& p : model_presets()) std::cout << p.name << " (" << p.activations.size() << " layers)\n";
    std::exit(0);
  }, "List presets");

  metrics::CostParams cp;
  cp.N_enc = 4096 + 32;
  cp.gc_bits = 0;
  bool as_json = false;
  auto* predict = app.add_subcommand("predict", "Evaluate the communication-cost formulas");
  predict->add_option("--N", cp.N, "Ring bits");
  predict->add_option("--kappa", cp.kappa, "Label bits");
  predict->add_option("--n-enc", cp.N_enc, "Bits per ciphertext element");
  predict->add_option("--gc-bits", cp.gc_bits, "|GC| bits per element");
  predict->add_option("--n", cp.n, "Activations per layer");
  predict->add_option("--input-side", cp.h, "Input side");
  predict->add_option("--kernel-side", cp.g, "Kernel side");
  predict->add_option("--in-channels", cp.i, "Input channels");
  predict->add_option("--out-channels", cp.o, "Output channels");
  predict->add_option("--T", cp.T, "Colluding edge servers");
  predict->add_option("--P", cp.P, "Clusters");
  predict->add_option("--p", cp.p, "SecureNN field size (reference only)");
  predict->add_flag("--json", as_json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(o, self_path(argv[0]));
    if (*oracle) return cmd_oracle(o);
    if (*verify) return cmd_verify(results, oracles);
    if (*gen) return cmd_genmodel(preset, dims, acts, gen_seed, bits, frac, scale, gen_out);
    if (*predict) return cmd_predict(cp, as_json);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  }
  return 0;
}
