#include "swarm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "swarm/content.hpp"
#include "swarm/engine.hpp"
#include "swarm/svg.hpp"

namespace swarm {

namespace fs = std::filesystem;

std::vector<MetricsBundle> run_experiment(const Scenario& scenario) {
  scenario.validate();
  std::vector<MetricsBundle> bundles;
  bundles.reserve(scenario.runs);
  for (int run = 0; run < scenario.runs; ++run) {
    try {
      Simulation sim(scenario, run);
      bundles.push_back(sim.run());
    } catch (const SimError& e) {
      throw SimError("scenario content_kb=" + std::to_string(scenario.content_size / kKiB) +
                     " piece_kb=" + std::to_string(scenario.piece_size / kKiB) +
                     " run=" + std::to_string(run) + ": " + e.what());
    }
  }
  return bundles;
}

RunSummary summarize_runs(const Scenario& scenario, const std::vector<MetricsBundle>& bundles) {
  RunSummary out;
  std::vector<std::vector<double>> runs_times;
  for (const auto& b : bundles) runs_times.push_back(b.completion_times);
  if (!bundles.empty() && scenario.leecher_count > 0)
    out.aggregate = completion_stats(runs_times);

  TorrentSpec spec(scenario.content_size, scenario.piece_size, scenario.subpiece_size,
                   scenario.metainfo_fixed_overhead);
  double dup_sum = 0, overhead_sum = 0, util_sum = 0;
  int overhead_n = 0;
  for (const auto& b : bundles) {
    dup_sum += static_cast<double>(seed_duplicates(b.seed_piece_log, spec).duplicate_bytes);
    util_sum += mid_phase_utilization(utilization_series(b));
    try {
      overhead_sum += control_overhead(b.traffic);
      ++overhead_n;
    } catch (const std::invalid_argument&) {
      // zero-traffic run (no leechers); leave it out of the mean
    }
  }
  if (!bundles.empty()) {
    out.duplicate_bytes = static_cast<Bytes>(dup_sum / bundles.size());
    out.mid_utilization = util_sum / bundles.size();
  }
  if (overhead_n > 0) out.overhead_fraction = overhead_sum / overhead_n;
  out.aggregate.duplicate_bytes = out.duplicate_bytes;
  out.aggregate.overhead_fraction = out.overhead_fraction;
  out.aggregate.mid_utilization = out.mid_utilization;
  return out;
}

SweepRow run_cell(const Scenario& scenario) {
  SweepRow row;
  row.content_size = scenario.content_size;
  row.piece_size = scenario.piece_size;
  TorrentSpec spec(scenario.content_size, scenario.piece_size, scenario.subpiece_size,
                   scenario.metainfo_fixed_overhead);
  row.metainfo_bytes = spec.metainfo_size();
  row.bitfield_bytes = message_wire_size(MsgKind::bitfield, spec);
  try {
    row.bundles = run_experiment(scenario);
    RunSummary summary = summarize_runs(scenario, row.bundles);
    row.median_completion = summary.aggregate.median_completion;
    row.stddev_completion = summary.aggregate.stddev_completion;
    row.mid_utilization = summary.mid_utilization;
    row.duplicate_kb = static_cast<double>(summary.duplicate_bytes) / kKiB;
    row.overhead_fraction = summary.overhead_fraction;
    row.ok = true;
    row.status = "ok";
  } catch (const std::exception& e) {
    row.ok = false;
    std::string msg = e.what();
    for (char& c : msg)
      if (c == ',' || c == '\n') c = ';';
    row.status = "error: " + msg;
  }
  return row;
}

std::vector<SweepRow> sweep(const SweepGrid& grid, const Scenario& base, int workers) {
  grid.validate();
  std::vector<Scenario> cells;
  for (Bytes content : grid.content_sizes)
    for (Bytes piece : grid.piece_sizes) {
      Scenario s = base;
      s.content_size = content;
      s.piece_size = piece;
      s.validate();  // any invalid cell aborts before simulations start
      cells.push_back(s);
    }

  std::vector<SweepRow> rows(cells.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) rows[i] = run_cell(cells[i]);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      rows[i] = run_cell(cells[i]);
    }
  };
  std::vector<std::thread> pool;
  int count = std::min<int>(workers, static_cast<int>(cells.size()));
  for (int i = 0; i < count; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return rows;
}

namespace {

std::string num(double v, const char* format) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string series_suffix(const SweepRow& row) {
  return "c" + std::to_string(row.content_size / kKiB) + "_p" +
         std::to_string(row.piece_size / kKiB);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void emit_series_files(const SweepRow& row, const fs::path& dir) {
  std::ostringstream cdf;
  cdf << "run,time_s,fraction\n";
  std::vector<double> pooled;
  for (std::size_t r = 0; r < row.bundles.size(); ++r) {
    for (auto [t, f] : completion_cdf(row.bundles[r].completion_times))
      cdf << r << "," << num(t, "%.4f") << "," << num(f, "%.6f") << "\n";
    pooled.insert(pooled.end(), row.bundles[r].completion_times.begin(),
                  row.bundles[r].completion_times.end());
  }
  for (auto [t, f] : completion_cdf(std::move(pooled)))
    cdf << "pooled," << num(t, "%.4f") << "," << num(f, "%.6f") << "\n";
  write_file(dir / ("cdf_" + series_suffix(row) + ".csv"), cdf.str());

  std::ostringstream util;
  util << "run,window_start_s,utilization\n";
  for (std::size_t r = 0; r < row.bundles.size(); ++r) {
    auto series = utilization_series(row.bundles[r]);
    for (std::size_t w = 0; w < series.size(); ++w)
      util << r << "," << num(w * kUtilizationWindow, "%.1f") << ","
           << num(series[w], "%.6f") << "\n";
  }
  write_file(dir / ("util_" + series_suffix(row) + ".csv"), util.str());
}

void emit_charts(const std::vector<SweepRow>& rows, const fs::path& dir) {
  std::vector<Bytes> contents;
  for (const auto& r : rows)
    if (contents.empty() || contents.back() != r.content_size)
      contents.push_back(r.content_size);

  auto label_mb = [](Bytes b) { return num(static_cast<double>(b) / kMiB, "%g") + " MB"; };

  for (Bytes content : contents) {
    SvgChart completion;
    completion.title = "Median download completion, " + label_mb(content) + " content";
    completion.x_label = "piece size (kB)";
    completion.y_label = "median completion (s)";
    completion.log_x = true;
    SvgSeries cs{label_mb(content), {}, true, true};
    SvgChart cdf;
    cdf.title = "Completion time CDF, " + label_mb(content) + " content";
    cdf.x_label = "time (s)";
    cdf.y_label = "fraction complete";
    SvgChart util;
    util.title = "Upload utilization, " + label_mb(content) + " content";
    util.x_label = "time (s)";
    util.y_label = "utilization";

    for (const auto& row : rows) {
      if (row.content_size != content || !row.ok) continue;
      double pkb = static_cast<double>(row.piece_size) / kKiB;
      cs.points.push_back({pkb, row.median_completion, row.stddev_completion});

      std::vector<double> pooled;
      for (const auto& b : row.bundles)
        pooled.insert(pooled.end(), b.completion_times.begin(), b.completion_times.end());
      if (!pooled.empty()) {
        SvgSeries curve{num(pkb, "%g") + " kB", {}, true, false};
        for (auto [t, f] : completion_cdf(std::move(pooled))) curve.points.push_back({t, f, 0});
        cdf.series.push_back(std::move(curve));
      }
      if (!row.bundles.empty()) {
        auto series = utilization_series(row.bundles.front());
        SvgSeries curve{num(pkb, "%g") + " kB", {}, true, false};
        for (std::size_t w = 0; w < series.size(); ++w)
          curve.points.push_back({(w + 0.5) * kUtilizationWindow, series[w], 0});
        util.series.push_back(std::move(curve));
      }
    }
    if (!cs.points.empty()) {
      completion.series.push_back(std::move(cs));
      completion.save((dir / ("completion_c" + std::to_string(content / kKiB) + ".svg")).string());
      cdf.save((dir / ("cdf_c" + std::to_string(content / kKiB) + ".svg")).string());
      util.save((dir / ("util_c" + std::to_string(content / kKiB) + ".svg")).string());
    }

    // Seed unique/total piece uploads for the smallest and largest piece size.
    std::vector<const SweepRow*> picks;
    for (const auto& row : rows)
      if (row.content_size == content && row.ok && !row.bundles.empty())
        picks.push_back(&row);
    if (!picks.empty()) {
      for (const SweepRow* row : {picks.front(), picks.back()}) {
        TorrentSpec spec(row->content_size, row->piece_size, row->bundles[0].subpiece_size);
        auto dup = seed_duplicates(row->bundles[0].seed_piece_log, spec);
        SvgChart seed;
        seed.title = "Seed piece uploads, " + label_mb(content) + ", " +
                     num(static_cast<double>(row->piece_size) / kKiB, "%g") + " kB pieces (run 0)";
        seed.x_label = "time (s)";
        seed.y_label = "pieces uploaded";
        SvgSeries uniq{"unique", {}, true, false};
        for (auto [t, v] : dup.unique_series) uniq.points.push_back({t, double(v), 0});
        SvgSeries total{"total", {}, true, false};
        for (auto [t, v] : dup.total_series) total.points.push_back({t, double(v), 0});
        seed.series.push_back(std::move(uniq));
        seed.series.push_back(std::move(total));
        seed.save((dir / ("seed_" + series_suffix(*row) + ".svg")).string());
        if (picks.front() == picks.back()) break;
      }
    }
  }

  SvgChart metainfo;
  metainfo.title = "Metainfo file size";
  metainfo.x_label = "piece size (kB)";
  metainfo.y_label = "metainfo size (bytes)";
  metainfo.log_x = true;
  SvgChart overhead;
  overhead.title = "Control overhead (bitfield + have)";
  overhead.x_label = "piece size (kB)";
  overhead.y_label = "fraction of upload traffic";
  overhead.log_x = true;
  for (Bytes content : contents) {
    SvgSeries ms{label_mb(content), {}, true, true};
    SvgSeries os{label_mb(content), {}, true, true};
    for (const auto& row : rows) {
      if (row.content_size != content) continue;
      double pkb = static_cast<double>(row.piece_size) / kKiB;
      ms.points.push_back({pkb, static_cast<double>(row.metainfo_bytes), 0});
      if (row.ok) os.points.push_back({pkb, row.overhead_fraction, 0});
    }
    metainfo.series.push_back(std::move(ms));
    if (!os.points.empty()) overhead.series.push_back(std::move(os));
  }
  metainfo.save((dir / "metainfo.svg").string());
  if (!overhead.series.empty()) overhead.save((dir / "overhead.svg").string());
}

}  // namespace

void preflight_out_dir(const std::string& out_dir) {
  fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("output directory is not usable: " + out_dir);
  fs::path probe = dir / ".write_probe";
  {
    std::ofstream out(probe, std::ios::binary);
    if (!out) throw std::runtime_error("output directory is not writable: " + out_dir);
  }
  fs::remove(probe, ec);
}

std::string sweep_table_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "content_kb,piece_kb,median_completion_s,stddev_completion_s,mid_utilization,"
         "duplicate_kb,overhead_fraction,metainfo_bytes,bitfield_bytes,status\n";
  for (const auto& row : rows) {
    out << row.content_size / kKiB << "," << row.piece_size / kKiB << ",";
    if (row.ok) {
      out << num(row.median_completion, "%.3f") << "," << num(row.stddev_completion, "%.3f")
          << "," << num(row.mid_utilization, "%.4f") << "," << num(row.duplicate_kb, "%.1f")
          << "," << num(row.overhead_fraction, "%.6f") << ",";
    } else {
      out << ",,,,,";
    }
    out << row.metainfo_bytes << "," << row.bitfield_bytes << "," << row.status << "\n";
  }
  return out.str();
}

void emit_outputs(const std::vector<SweepRow>& rows, const std::string& out_dir) {
  preflight_out_dir(out_dir);
  fs::path dir(out_dir);
  write_file(dir / "sweep.csv", sweep_table_csv(rows));
  for (const auto& row : rows)
    if (row.ok) emit_series_files(row, dir);
  emit_charts(rows, dir);
}

}  // namespace swarm
