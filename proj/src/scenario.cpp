#include "swarm/scenario.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "swarm/content.hpp"

namespace swarm {

void Scenario::validate() const {
  if (leecher_count < 0) throw std::invalid_argument("leechers must be >= 0");
  if (cap_min <= 0 || cap_max < cap_min)
    throw std::invalid_argument("leecher capacity range must satisfy 0 < min <= max");
  if (seed_capacity <= 0) throw std::invalid_argument("seed capacity must be > 0");
  if (choke.upload_slots < 1) throw std::invalid_argument("upload_slots must be >= 1");
  if (choke.rechoke_period <= 0) throw std::invalid_argument("rechoke_period must be > 0");
  if (choke.optimistic_rotation < 1)
    throw std::invalid_argument("optimistic_rotation must be >= 1");
  if (pipeline_depth < 1 || pipeline_depth > 16)
    throw std::invalid_argument("pipeline_depth must be in [1, 16]");
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (link.one_way_delay < 0) throw std::invalid_argument("delay must be >= 0");
  if (link.delay_jitter < 0 || link.delay_jitter >= 1)
    throw std::invalid_argument("delay_jitter must be in [0, 1)");
  if (link.tcp.floor_fraction <= 0 || link.tcp.floor_fraction > 1)
    throw std::invalid_argument("tcp floor_fraction must be in (0, 1]");
  if (link.tcp.ramp_time <= 0) throw std::invalid_argument("tcp ramp_time must be > 0");
  if (link.tcp.idle_decay_after < 0)
    throw std::invalid_argument("tcp idle_decay must be >= 0");
  if (peer_set_size < 0) throw std::invalid_argument("peer_set_size must be >= 0");
  if (watchdog_horizon <= 0) throw std::invalid_argument("watchdog horizon must be > 0");
  // TorrentSpec enforces piece/subpiece geometry, including
  // subpiece_size <= piece_size.
  TorrentSpec spec(content_size, piece_size, subpiece_size, metainfo_fixed_overhead);
  (void)spec;
}

SweepGrid SweepGrid::defaults() {
  SweepGrid g;
  for (Bytes mb : {1, 5, 10, 20, 50, 100}) g.content_sizes.push_back(mb * kMiB);
  for (Bytes kb : {16, 32, 64, 128, 256, 512, 1024, 2048}) g.piece_sizes.push_back(kb * kKiB);
  return g;
}

void SweepGrid::validate() const {
  if (content_sizes.empty() || piece_sizes.empty())
    throw std::invalid_argument("sweep grid must not be empty");
}

namespace {

struct ParsedConfig {
  std::map<std::string, std::string> values;
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

ParsedConfig parse_kv(const std::string& text) {
  ParsedConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                 ": empty key");
    if (!cfg.values.emplace(key, value).second)
      throw std::invalid_argument("config: duplicate key '" + key + "'");
  }
  return cfg;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw std::invalid_argument("config: key '" + key + "': not a number: '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw std::invalid_argument("config: key '" + key + "': not an integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<Bytes> to_kb_list(const std::string& key, const std::string& v) {
  std::vector<Bytes> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(to_int(key, item) * kKiB);
  }
  if (out.empty()) throw std::invalid_argument("config: key '" + key + "': empty list");
  return out;
}

using Setter = std::function<void(const std::string&, const std::string&)>;

std::map<std::string, Setter> scenario_setters(Scenario& s) {
  std::map<std::string, Setter> m;
  m["leechers"] = [&](auto& k, auto& v) { s.leecher_count = static_cast<int>(to_int(k, v)); };
  m["cap_min_kb"] = [&](auto& k, auto& v) { s.cap_min = to_double(k, v) * kKiB; };
  m["cap_max_kb"] = [&](auto& k, auto& v) { s.cap_max = to_double(k, v) * kKiB; };
  m["seed_capacity_kb"] = [&](auto& k, auto& v) { s.seed_capacity = to_double(k, v) * kKiB; };
  m["upload_slots"] = [&](auto& k, auto& v) {
    s.choke.upload_slots = static_cast<int>(to_int(k, v));
  };
  m["rechoke_period_s"] = [&](auto& k, auto& v) { s.choke.rechoke_period = to_double(k, v); };
  m["optimistic_slot"] = [&](auto& k, auto& v) { s.choke.optimistic_slot = to_bool(k, v); };
  m["optimistic_rotation"] = [&](auto& k, auto& v) {
    s.choke.optimistic_rotation = static_cast<int>(to_int(k, v));
  };
  m["content_kb"] = [&](auto& k, auto& v) { s.content_size = to_int(k, v) * kKiB; };
  m["piece_kb"] = [&](auto& k, auto& v) { s.piece_size = to_int(k, v) * kKiB; };
  m["subpiece_kb"] = [&](auto& k, auto& v) { s.subpiece_size = to_int(k, v) * kKiB; };
  m["metainfo_overhead_bytes"] = [&](auto& k, auto& v) {
    s.metainfo_fixed_overhead = to_int(k, v);
  };
  m["pipeline_depth"] = [&](auto& k, auto& v) {
    s.pipeline_depth = static_cast<int>(to_int(k, v));
  };
  m["order_mode"] = [&](auto& k, auto& v) {
    if (v == "deterministic") s.order_mode = OrderMode::deterministic;
    else if (v == "random") s.order_mode = OrderMode::random;
    else throw std::invalid_argument("config: key '" + k + "': expected deterministic|random");
  };
  m["endgame"] = [&](auto& k, auto& v) { s.endgame = to_bool(k, v); };
  m["peer_set_size"] = [&](auto& k, auto& v) {
    s.peer_set_size = static_cast<int>(to_int(k, v));
  };
  m["runs"] = [&](auto& k, auto& v) { s.runs = static_cast<int>(to_int(k, v)); };
  m["rng_seed"] = [&](auto& k, auto& v) {
    s.rng_seed = static_cast<std::uint64_t>(to_int(k, v));
  };
  m["freeze_capacities"] = [&](auto& k, auto& v) { s.freeze_capacities = to_bool(k, v); };
  m["watchdog_s"] = [&](auto& k, auto& v) { s.watchdog_horizon = to_double(k, v); };
  m["link.delay_ms"] = [&](auto& k, auto& v) { s.link.one_way_delay = to_double(k, v) / 1000.0; };
  m["link.delay_jitter"] = [&](auto& k, auto& v) { s.link.delay_jitter = to_double(k, v); };
  m["link.tcp_model"] = [&](auto& k, auto& v) {
    if (v == "off") s.link.tcp.enabled = false;
    else if (v == "ramp") s.link.tcp.enabled = true;
    else throw std::invalid_argument("config: key '" + k + "': expected off|ramp");
  };
  m["link.tcp_ramp_time_s"] = [&](auto& k, auto& v) { s.link.tcp.ramp_time = to_double(k, v); };
  m["link.tcp_floor"] = [&](auto& k, auto& v) { s.link.tcp.floor_fraction = to_double(k, v); };
  m["link.tcp_idle_decay_s"] = [&](auto& k, auto& v) {
    s.link.tcp.idle_decay_after = to_double(k, v);
  };
  return m;
}

const std::set<std::string> kGridKeys = {"sweep.content_kb", "sweep.piece_kb"};

}  // namespace

Scenario parse_scenario(const std::string& config_text) {
  Scenario s;
  auto cfg = parse_kv(config_text);
  auto setters = scenario_setters(s);
  for (const auto& [key, value] : cfg.values) {
    if (kGridKeys.count(key)) continue;  // grid keys live in the same file
    auto it = setters.find(key);
    if (it == setters.end())
      throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second(key, value);
  }
  s.validate();
  return s;
}

SweepGrid parse_grid(const std::string& config_text) {
  SweepGrid g = SweepGrid::defaults();
  auto cfg = parse_kv(config_text);
  for (const auto& [key, value] : cfg.values) {
    if (key == "sweep.content_kb") g.content_sizes = to_kb_list(key, value);
    else if (key == "sweep.piece_kb") g.piece_sizes = to_kb_list(key, value);
  }
  g.validate();
  return g;
}

std::uint64_t run_seed(const Scenario& s, int run_index) {
  return s.rng_seed + static_cast<std::uint64_t>(run_index);
}

std::vector<double> leecher_capacities(const Scenario& s, int run_index) {
  Rng rng(s.freeze_capacities ? s.rng_seed : run_seed(s, run_index));
  std::vector<double> caps;
  caps.reserve(s.leecher_count);
  for (int i = 0; i < s.leecher_count; ++i) caps.push_back(rng.uniform(s.cap_min, s.cap_max));
  return caps;
}

}  // namespace swarm
