#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spamlab/console/server.hpp"
#include "spamlab/error.hpp"
#include "spamlab/report.hpp"
#include "spamlab/scenario.hpp"

namespace fs = std::filesystem;
using namespace spamlab;

namespace {

console::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

scenario::ScenarioSpec load(const fs::path& path, std::optional<std::uint64_t> seed) {
  return scenario::load_spec(path, seed);
}

fs::path default_out(const scenario::ScenarioSpec& spec) {
  return fs::path("out") / (spec.name + "-seed" + std::to_string(spec.seed));
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << '\n';
}

int cmd_run(const fs::path& spec_path, std::optional<std::uint64_t> seed, const std::optional<fs::path>& patch_log,
            std::optional<fs::path> out) {
  const auto spec = load(spec_path, seed);
  scenario::PatchLog patches;
  if (patch_log) patches = scenario::load_patch_log(*patch_log);
  const auto result = scenario::run(spec, patches);
  const fs::path dir = out ? *out : default_out(spec);
  report::emit_report(result, dir);
  print_warnings(result.warnings);
  std::cout << report::summary_table({report::summary_row(report::results_json(result))});
  std::cout << "outputs: " << dir.string() << '\n';
  return 0;
}

int cmd_batch(const fs::path& dir, std::optional<fs::path> out) {
  std::vector<fs::path> specs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") specs.push_back(e.path());
  std::sort(specs.begin(), specs.end());
  if (specs.empty()) throw ConfigError("no *.json scenario files in " + dir.string());

  // Validate everything before running anything.
  std::vector<scenario::ScenarioSpec> loaded;
  for (const auto& p : specs) loaded.push_back(load(p, std::nullopt));

  const fs::path root = out ? *out : fs::path("out") / "batch";
  std::vector<report::SummaryRow> rows;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    std::cerr << "running " << specs[i].filename().string() << '\n';
    const auto result = scenario::run(loaded[i]);
    report::emit_report(result, root / specs[i].stem());
    print_warnings(result.warnings);
    rows.push_back(report::summary_row(report::results_json(result)));
  }
  const std::string table = report::summary_table(rows);
  std::ofstream(root / "summary.txt") << table;
  std::cout << table;
  return 0;
}

int cmd_report(const std::vector<fs::path>& inputs) {
  std::vector<report::SummaryRow> rows;
  for (auto p : inputs) {
    if (fs::is_directory(p)) p /= "results.json";
    const auto doc = report::load_json(p);
    auto row = report::summary_row(doc);
    if (doc.contains("classification")) row.outcome = report::reclassify(doc);
    rows.push_back(row);
  }
  std::cout << report::summary_table(rows);
  return 0;
}

int cmd_serve(const fs::path& spec_path, std::optional<std::uint64_t> seed, console::ServerConfig config,
              std::optional<fs::path> out) {
  const auto spec = load(spec_path, seed);
  scenario::Scenario s(spec);
  console::Server server(s, config);
  server.start();
  std::cerr << "console listening on " << config.bind_address << ':' << server.port() << '\n';
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run();
  g_server = nullptr;
  print_warnings(server.warnings());
  if (!s.done()) {
    std::cerr << "stopped at t=" << s.time_s() << " s; no report written\n";
    return 0;
  }
  const auto result = s.result();
  const fs::path dir = out ? *out : default_out(spec);
  report::emit_report(result, dir);
  std::cout << report::summary_table({report::summary_row(report::results_json(result))});
  std::cout << "outputs: " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SpAmming GNSS attack lab"};
  app.require_subcommand(1);

  fs::path spec_path;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> patch_log;
  std::optional<fs::path> out;

  auto* run = app.add_subcommand("run", "Run one scenario and write its report");
  run->add_option("spec", spec_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--patch-log", patch_log, "Replay a patch log")->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory");

  fs::path batch_dir;
  auto* batch = app.add_subcommand("batch", "Run every scenario in a directory");
  batch->add_option("dir", batch_dir, "Directory of scenario JSON files")->required()->check(CLI::ExistingDirectory);
  batch->add_option("--out", out, "Output root directory");

  std::vector<fs::path> results;
  auto* rep = app.add_subcommand("report", "Reclassify stored results and print the summary");
  rep->add_option("results", results, "results.json files or run directories")->required()->check(CLI::ExistingPath);

  console::ServerConfig server_config;
  server_config.port = console::default_port();
  std::optional<fs::path> session_log;
  auto* serve = app.add_subcommand("serve", "Run a scenario under the live console service");
  serve->add_option("spec", spec_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  serve->add_option("--seed", seed, "Override the scenario seed");
  serve->add_option("--port", server_config.port, "TCP port (default SPAMLAB_PORT or 7420)");
  serve->add_option("--bind", server_config.bind_address, "Bind address");
  serve->add_option("--speed", server_config.speed, "Scenario seconds per wall second; 0 runs unpaced")
      ->check(CLI::NonNegativeNumber);
  serve->add_flag("--paused", server_config.start_paused, "Wait for RESUME before stepping");
  serve->add_option("--session-log", session_log, "Write applied commands as a patch log");
  serve->add_option("--out", out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(spec_path, seed, patch_log, out);
    if (*batch) return cmd_batch(batch_dir, out);
    if (*rep) return cmd_report(results);
    if (*serve) {
      server_config.session_log = session_log;
      return cmd_serve(spec_path, seed, server_config, out);
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "invalid scenario: " << e.what() << '\n';
    return 2;
  } catch (const ClassificationError& e) {
    std::cerr << "classification error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
