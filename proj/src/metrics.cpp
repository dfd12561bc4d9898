#include "swarm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace swarm {

void add_upload_span(std::vector<double>& windows, double t0, double t1, double bytes,
                     double window) {
  if (t1 <= t0 || bytes <= 0) return;
  double rate = bytes / (t1 - t0);
  int w = static_cast<int>(t0 / window);
  double cursor = t0;
  while (cursor < t1) {
    double wend = (w + 1) * window;
    double seg_end = std::min(t1, wend);
    if (static_cast<std::size_t>(w) >= windows.size()) windows.resize(w + 1, 0.0);
    windows[w] += rate * (seg_end - cursor);
    cursor = seg_end;
    ++w;
  }
}

std::vector<double> utilization_series(const std::vector<double>& window_upload_bytes,
                                       const std::vector<double>& capacities,
                                       const std::vector<double>& departure_times,
                                       double window) {
  double last_departure = 0;
  for (double d : departure_times) last_departure = std::max(last_departure, d);
  int n_windows = static_cast<int>(std::ceil(last_departure / window));
  std::vector<double> series;
  series.reserve(n_windows);
  for (int w = 0; w < n_windows; ++w) {
    double t0 = w * window;
    double denom = 0;
    for (std::size_t i = 0; i < capacities.size(); ++i) {
      double overlap = std::clamp(departure_times[i] - t0, 0.0, window);
      denom += capacities[i] * overlap;
    }
    if (denom <= 0) break;
    double num = static_cast<std::size_t>(w) < window_upload_bytes.size()
                     ? window_upload_bytes[w]
                     : 0.0;
    series.push_back(num / denom);
  }
  return series;
}

std::vector<double> utilization_series(const MetricsBundle& b) {
  return utilization_series(b.window_upload_bytes, b.leecher_capacities, b.completion_times);
}

double mid_phase_utilization(const std::vector<double>& series) {
  if (series.empty()) return 0;
  std::size_t lo = series.size() * 2 / 10;
  std::size_t hi = series.size() * 8 / 10;
  if (hi <= lo) {
    lo = 0;
    hi = series.size();
  }
  double sum = 0;
  for (std::size_t i = lo; i < hi; ++i) sum += series[i];
  return sum / (hi - lo);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<std::pair<double, double>> completion_cdf(std::vector<double> times) {
  std::sort(times.begin(), times.end());
  std::vector<std::pair<double, double>> cdf;
  cdf.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i)
    cdf.emplace_back(times[i], static_cast<double>(i + 1) / times.size());
  return cdf;
}

RunAggregate completion_stats(const std::vector<std::vector<double>>& runs) {
  if (runs.empty()) throw std::invalid_argument("completion_stats: no runs");
  std::vector<double> medians;
  std::vector<double> pooled;
  for (const auto& run : runs) {
    if (run.empty()) continue;
    medians.push_back(median(run));
    pooled.insert(pooled.end(), run.begin(), run.end());
  }
  RunAggregate agg;
  if (medians.empty()) return agg;
  agg.median_completion = median(medians);
  if (medians.size() > 1) {
    double mean = 0;
    for (double m : medians) mean += m;
    mean /= medians.size();
    double ss = 0;
    for (double m : medians) ss += (m - mean) * (m - mean);
    agg.stddev_completion = std::sqrt(ss / (medians.size() - 1));
  }
  agg.cdf_points = completion_cdf(std::move(pooled));
  return agg;
}

SeedDuplicates seed_duplicates(const std::vector<SeedPieceEvent>& log,
                               const TorrentSpec& spec) {
  SeedDuplicates out;
  long unique = 0, total = 0;
  for (const auto& e : log) {
    ++total;
    if (e.was_first_copy) {
      ++unique;
      if (unique == spec.piece_count() && !out.first_copy_time)
        out.first_copy_time = e.time;
    } else {
      out.duplicate_bytes += spec.piece_length(e.piece);
    }
    out.unique_series.emplace_back(e.time, unique);
    out.total_series.emplace_back(e.time, total);
  }
  return out;
}

double control_overhead(const std::vector<PeerTraffic>& traffic) {
  double control = 0, total = 0;
  for (const auto& t : traffic) {
    control += static_cast<double>(t.bitfield_bytes + t.have_bytes);
    total += static_cast<double>(t.bitfield_bytes + t.have_bytes + t.data_payload_bytes +
                                 t.data_header_bytes);
  }
  if (total <= 0) throw std::invalid_argument("control_overhead: zero total traffic");
  return control / total;
}

}  // namespace swarm
