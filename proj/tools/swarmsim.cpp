#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "swarm/content.hpp"
#include "swarm/experiment.hpp"
#include "swarm/scenario.hpp"

namespace {

using namespace swarm;

// Accepts plain bytes or a k/M suffix (binary units): "16k", "5M", "1048576".
Bytes parse_size(const std::string& text) {
  if (text.empty()) throw CLI::ValidationError("empty size");
  std::string digits = text;
  Bytes mult = 1;
  char last = digits.back();
  if (last == 'k' || last == 'K') {
    mult = kKiB;
    digits.pop_back();
  } else if (last == 'm' || last == 'M') {
    mult = kMiB;
    digits.pop_back();
  }
  try {
    std::size_t used = 0;
    long long v = std::stoll(digits, &used);
    if (used != digits.size() || v <= 0) throw std::invalid_argument("");
    return v * mult;
  } catch (...) {
    throw CLI::ValidationError("bad size '" + text + "' (use e.g. 16k, 5M, or bytes)");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CliOverrides {
  std::string config_path;
  std::string content_size, piece_size, subpiece_size;
  int runs = -1;
  long long seed = -1;
  std::string order_mode, tcp_model;
  double delay_ms = -1;
  std::string out_dir = "out";
  int workers = 1;
};

void add_common_flags(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "scenario config file (key = value lines)");
  cmd->add_option("--content-size", o.content_size, "content size (e.g. 5M, 5120k)");
  cmd->add_option("--piece-size", o.piece_size, "piece size (e.g. 256k)");
  cmd->add_option("--subpiece-size", o.subpiece_size, "subpiece size (default 16k)");
  cmd->add_option("--runs", o.runs, "number of runs per scenario");
  cmd->add_option("--seed", o.seed, "base rng seed");
  cmd->add_option("--order-mode", o.order_mode, "rarest-first tie-break: deterministic|random")
      ->check(CLI::IsMember({"deterministic", "random"}));
  cmd->add_option("--tcp-model", o.tcp_model, "tcp rate model: off|ramp")
      ->check(CLI::IsMember({"off", "ramp"}));
  cmd->add_option("--delay-ms", o.delay_ms, "mean one-way delay in milliseconds");
  cmd->add_option("--out-dir", o.out_dir, "output directory (default: out)");
}

Scenario build_scenario(const CliOverrides& o, std::string* config_text_out = nullptr) {
  std::string text = o.config_path.empty() ? "" : read_file(o.config_path);
  if (config_text_out) *config_text_out = text;
  Scenario s = parse_scenario(text);
  if (!o.content_size.empty()) s.content_size = parse_size(o.content_size);
  if (!o.piece_size.empty()) s.piece_size = parse_size(o.piece_size);
  if (!o.subpiece_size.empty()) s.subpiece_size = parse_size(o.subpiece_size);
  if (o.runs >= 0) s.runs = o.runs;
  if (o.seed >= 0) s.rng_seed = static_cast<std::uint64_t>(o.seed);
  if (o.order_mode == "deterministic") s.order_mode = OrderMode::deterministic;
  if (o.order_mode == "random") s.order_mode = OrderMode::random;
  if (o.tcp_model == "off") s.link.tcp.enabled = false;
  if (o.tcp_model == "ramp") s.link.tcp.enabled = true;
  if (o.delay_ms >= 0) s.link.one_way_delay = o.delay_ms / 1000.0;
  s.validate();
  return s;
}

int cmd_run(const CliOverrides& o) {
  Scenario s = build_scenario(o);
  preflight_out_dir(o.out_dir);
  SweepRow row = run_cell(s);
  emit_outputs({row}, o.out_dir);
  if (!row.ok) {
    std::cerr << row.status << "\n";
    return 1;
  }
  std::cout << "content_kb=" << s.content_size / kKiB << " piece_kb=" << s.piece_size / kKiB
            << " runs=" << s.runs << "\n"
            << "median_completion_s=" << row.median_completion
            << " stddev_s=" << row.stddev_completion
            << " mid_utilization=" << row.mid_utilization << "\n"
            << "duplicate_kb=" << row.duplicate_kb
            << " overhead_fraction=" << row.overhead_fraction
            << " metainfo_bytes=" << row.metainfo_bytes
            << " bitfield_bytes=" << row.bitfield_bytes << "\n"
            << "outputs written to " << o.out_dir << "\n";
  return 0;
}

int cmd_sweep(const CliOverrides& o) {
  std::string config_text;
  Scenario base = build_scenario(o, &config_text);
  SweepGrid grid = parse_grid(config_text);
  if (!o.content_size.empty()) grid.content_sizes = {parse_size(o.content_size)};
  if (!o.piece_size.empty()) grid.piece_sizes = {parse_size(o.piece_size)};
  preflight_out_dir(o.out_dir);
  auto rows = sweep(grid, base, o.workers);
  emit_outputs(rows, o.out_dir);
  int failures = 0;
  for (const auto& row : rows)
    if (!row.ok) ++failures;
  std::cout << rows.size() << " cells, " << failures << " failed; outputs written to "
            << o.out_dir << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic BitTorrent swarm simulator and piece-size experiment harness"};
  app.require_subcommand(1);

  CliOverrides run_opts, sweep_opts;
  CLI::App* run_cmd = app.add_subcommand("run", "simulate one scenario");
  add_common_flags(run_cmd, run_opts);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run the content x piece-size grid");
  add_common_flags(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--workers", sweep_opts.workers, "parallel sweep workers (default 1)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run_cmd->parsed()) return cmd_run(run_opts);
    return cmd_sweep(sweep_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
