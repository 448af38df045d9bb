// Command line entry point.

#include <unistd.h>

#include <CLI11.hpp>
#include <csignal>
#include <iostream>

#include "arm/error.hpp"
#include "arm/harness.hpp"
#include "arm/notifier.hpp"
#include "arm/query.hpp"
#include "arm/socket_net.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed, const std::string& out, bool quiet) {
  const auto scenario = arm::load_scenario(scenario_path);
  const auto result = arm::run(scenario, seed);
  arm::write_outputs(result, out);
  if (!quiet) std::cout << arm::report_text(result.report);
  return 0;
}

int cmd_report(const std::string& metrics, const std::string& format) {
  arm::RunReport report;
  arm::fill_latency(report, arm::MetricsRecorder::import_csv(metrics));
  std::cout << arm::format_report(report, format);
  return 0;
}

int cmd_render(const std::string& text) {
  std::cout << arm::render(arm::parse(text)) << "\n";
  return 0;
}

struct ServeOptions {
  std::string bind = "0.0.0.0:" + std::to_string(arm::kDefaultPort);
  std::string name;
  std::vector<std::string> peers;
  std::string scenario;
  std::string node;
  std::optional<double> duration_s;
};

// Hosts a node on the socket backend. With a scenario, relations owned by
// `node` are created with their initial rows and the others are tracked
// as replicas when listed so.
int cmd_serve(const ServeOptions& o) {
  const auto bind = arm::parse_endpoint(o.bind);
  const arm::NodeId self{o.name.empty() ? bind.host : o.name, static_cast<std::int64_t>(::getpid())};
  arm::SocketNetwork net(self);
  const auto bound = net.listen(bind);

  arm::NodeConfig cfg;
  cfg.id = self;
  std::vector<const arm::ScenarioRelation*> owned, replicated;
  std::optional<arm::Scenario> scenario;
  if (!o.scenario.empty()) {
    scenario = arm::load_scenario(o.scenario);
    const auto& node = scenario->node(o.node);
    cfg.retry = scenario->retry;
    cfg.processing_ms = node.processing_ms;
    for (const auto& r : scenario->relations) {
      if (r.owner == o.node) {
        cfg.schema.push_back(r.schema);
        owned.push_back(&r);
      } else if (std::find(r.replicas.begin(), r.replicas.end(), o.node) != r.replicas.end()) {
        replicated.push_back(&r);
      }
    }
  }
  auto hub = arm::Notifier::init(net, cfg);
  hub->set_event_sink([&net](std::string_view kind, const std::string& details) {
    std::cout << arm::format_ms(net.now_ms()) << " " << kind << " " << details << std::endl;
  });
  for (const auto* r : owned) {
    auto& store = hub->store();
    auto tx = store.begin();
    for (const auto& row : r->rows) {
      std::vector<arm::Assignment> values;
      for (std::size_t c = 0; c < row.size(); ++c) values.push_back({r->schema.columns[c].name, row[c]});
      store.execute(arm::build(arm::QuerySpec::from(r->schema.name), arm::CommandKind::insert, std::move(values)), tx);
    }
    store.commit(tx);
    hub->register_relation(r->schema.name, arm::Role::owner);
  }
  std::cout << "listening on " << bound.str() << " as " << self.str() << std::endl;
  for (const auto& p : o.peers) {
    try {
      std::cout << "connected to " << net.connect(arm::parse_endpoint(p)).str() << std::endl;
    } catch (const arm::Error& e) {
      std::cerr << "peer " << p << ": " << e.what() << std::endl;
    }
  }
  for (const auto* r : replicated) hub->register_relation(r->schema.name, arm::Role::replica);

  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  const double limit = o.duration_s ? *o.duration_s * 1000 : std::numeric_limits<double>::infinity();
  net.run_until([] { return g_stop != 0; }, limit);
  std::cout << net.log().text();
  return 0;
}

int cmd_ping(const std::string& target, int count, double timeout_ms) {
  arm::SocketNetwork net(arm::NodeId{"ping", static_cast<std::int64_t>(::getpid())});
  const auto peer = net.connect(arm::parse_endpoint(target), timeout_ms);
  int lost = 0;
  for (int i = 0; i < count; ++i) {
    if (const auto rtt = net.ping(peer, timeout_ms)) {
      std::cout << "PONG from " << peer.str() << " in " << arm::format_ms(*rtt) << " ms" << std::endl;
    } else {
      std::cout << "no PONG from " << peer.str() << " within " << timeout_ms << " ms" << std::endl;
      ++lost;
    }
  }
  return lost == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"arm: replicated relational middleware with feedback-driven placement"};
  app.require_subcommand(1);

  std::string scenario, out = "out", metrics, format = "text", query, target;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run a scenario on the simulated network");
  run->add_option("--scenario", scenario, "Scenario JSON file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out, "Output directory")->capture_default_str();
  run->add_flag("--quiet", quiet, "Do not print the latency summary");

  auto* report = app.add_subcommand("report", "Summarize an exported metrics.csv");
  report->add_option("--metrics", metrics, "metrics.csv file")->required();
  report->add_option("--format", format, "text or json")->capture_default_str();

  auto* render = app.add_subcommand("render-query", "Parse canonical command text and print its normalized form");
  render->add_option("text", query, "Command text")->required();

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Run a node on the socket backend");
  serve->add_option("--bind", serve_opts.bind, "host:port to listen on")->capture_default_str();
  serve->add_option("--name", serve_opts.name, "Host part of the node identity (default: bind host)");
  serve->add_option("--peer", serve_opts.peers, "host:port of a peer to connect to (repeatable)");
  serve->add_option("--scenario", serve_opts.scenario, "Scenario whose relations this node hosts");
  serve->add_option("--node", serve_opts.node, "Node id within the scenario");
  serve->add_option("--duration-s", serve_opts.duration_s, "Stop after this many seconds");

  int count = 1;
  double timeout_ms = 2000;
  auto* ping = app.add_subcommand("ping", "PING a node and wait for the PONG");
  ping->add_option("target", target, "host:port")->required();
  ping->add_option("--count", count, "Number of pings")->capture_default_str()->check(CLI::PositiveNumber);
  ping->add_option("--timeout-ms", timeout_ms, "Per-ping timeout")->capture_default_str()->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(scenario, seed, out, quiet);
    if (*report) return cmd_report(metrics, format);
    if (*render) return cmd_render(query);
    if (*serve) {
      if (serve_opts.scenario.empty() != serve_opts.node.empty())
        throw arm::Error(arm::ErrorCode::invalid_argument, "--scenario and --node go together");
      return cmd_serve(serve_opts);
    }
    if (*ping) return cmd_ping(target, count, timeout_ms);
  } catch (const arm::Error& e) {
    std::cerr << "error: " << arm::to_string(e.code()) << ": " << e.what();
    if (e.offset()) std::cerr << " (at byte " << *e.offset() << ")";
    std::cerr << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
