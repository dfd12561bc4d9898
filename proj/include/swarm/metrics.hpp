#pragma once

#include <optional>
#include <string>
#include <vector>

#include "swarm/content.hpp"
#include "swarm/core.hpp"

namespace swarm {

constexpr double kUtilizationWindow = 5.0;

// One seed upload of a complete piece to one receiver.
struct SeedPieceEvent {
  double time = 0;
  PieceIndex piece = -1;
  bool was_first_copy = false;
};

struct PeerTraffic {
  Bytes bitfield_bytes = 0;
  Bytes have_bytes = 0;
  Bytes other_control_bytes = 0;  // handshake, (un)choke, (not_)interested, request
  Bytes data_payload_bytes = 0;   // subpiece payloads sent
  Bytes data_header_bytes = 0;    // 13 bytes per piece_data message sent
  Bytes data_received_bytes = 0;  // subpiece payloads received
};

// Everything one run produces. Plain values; reductions live in free
// functions below and in the harness.
struct MetricsBundle {
  int leecher_count = 0;
  Bytes content_size = 0;
  Bytes piece_size = 0;
  Bytes subpiece_size = 0;

  std::vector<double> completion_times;     // one per leecher; doubles as departure time
  std::vector<double> leecher_capacities;   // bytes/s
  std::vector<double> window_upload_bytes;  // leecher payload bytes per 5 s window
  std::vector<SeedPieceEvent> seed_piece_log;
  Bytes seed_duplicate_subpiece_bytes = 0;  // subpiece-level cross-check
  std::vector<PeerTraffic> traffic;         // per peer, seed last
  long dropped_deliveries = 0;
  long ignored_requests = 0;
  int max_outstanding = 0;
  long fresh_selections = 0;
  long events_processed = 0;
  double end_time = 0;
};

struct SeedDuplicates {
  std::vector<std::pair<double, long>> unique_series;  // (time, cumulative unique)
  std::vector<std::pair<double, long>> total_series;   // (time, cumulative total)
  Bytes duplicate_bytes = 0;
  std::optional<double> first_copy_time;
};

struct RunAggregate {
  double median_completion = 0;
  double stddev_completion = 0;
  std::vector<std::pair<double, double>> cdf_points;  // pooled over runs
  Bytes duplicate_bytes = 0;                          // mean over runs
  double overhead_fraction = 0;                       // mean over runs
  double mid_utilization = 0;                         // mean over runs
};

// Adds `bytes` spread uniformly over [t0, t1) into 5 s window buckets.
void add_upload_span(std::vector<double>& windows, double t0, double t1, double bytes,
                     double window = kUtilizationWindow);

// Windowed leecher upload utilization. Denominator prorates each leecher's
// capacity by its connected overlap with the window; the series ends when no
// leecher remains connected.
std::vector<double> utilization_series(const std::vector<double>& window_upload_bytes,
                                       const std::vector<double>& capacities,
                                       const std::vector<double>& departure_times,
                                       double window = kUtilizationWindow);

std::vector<double> utilization_series(const MetricsBundle& bundle);

// Mean utilization over windows in [20%, 80%) of the series.
double mid_phase_utilization(const std::vector<double>& series);

double median(std::vector<double> values);  // even count: mean of the two middles

// Median and sample standard deviation over the per-run medians, plus the
// CDF pooled over all runs. Throws on empty input.
RunAggregate completion_stats(const std::vector<std::vector<double>>& runs_completion_times);

std::vector<std::pair<double, double>> completion_cdf(std::vector<double> times);

SeedDuplicates seed_duplicates(const std::vector<SeedPieceEvent>& log, const TorrentSpec& spec);

// Fraction of pooled upload traffic spent on bitfield and have messages.
// Denominator: bitfield + have + data payload + piece_data headers. Requests
// and choke traffic are tracked but excluded. Throws when the total is zero.
double control_overhead(const std::vector<PeerTraffic>& traffic);

}  // namespace swarm
