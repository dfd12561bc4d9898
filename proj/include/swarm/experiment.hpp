#pragma once

#include <string>
#include <vector>

#include "swarm/metrics.hpp"
#include "swarm/scenario.hpp"

namespace swarm {

struct SweepRow {
  Bytes content_size = 0;
  Bytes piece_size = 0;
  bool ok = false;
  std::string status;  // "ok" or the failure diagnostic
  double median_completion = 0;
  double stddev_completion = 0;
  double mid_utilization = 0;
  double duplicate_kb = 0;
  double overhead_fraction = 0;
  Bytes metainfo_bytes = 0;
  Bytes bitfield_bytes = 0;
  std::vector<MetricsBundle> bundles;  // per run, kept for series emission
};

// Executes scenario.runs simulations with per-run derived seeds. Engine
// failures are rethrown with the scenario attached.
std::vector<MetricsBundle> run_experiment(const Scenario& scenario);

struct RunSummary {
  RunAggregate aggregate;
  double mid_utilization = 0;     // mean over runs
  double overhead_fraction = 0;   // mean over runs
  Bytes duplicate_bytes = 0;      // mean over runs
};

RunSummary summarize_runs(const Scenario& scenario, const std::vector<MetricsBundle>& bundles);

// One row per (content, piece) pair in deterministic grid order. All cell
// scenarios are validated before any simulation starts; runtime failures are
// recorded in-row and the sweep continues.
std::vector<SweepRow> sweep(const SweepGrid& grid, const Scenario& base, int workers = 1);

SweepRow run_cell(const Scenario& scenario);

// Creates out_dir and verifies it is writable; throws otherwise.
void preflight_out_dir(const std::string& out_dir);

std::string sweep_table_csv(const std::vector<SweepRow>& rows);

// Writes the sweep table, per-scenario CDF/utilization series files, and the
// summary charts into out_dir. Re-running produces identical bytes.
void emit_outputs(const std::vector<SweepRow>& rows, const std::string& out_dir);

}  // namespace swarm
