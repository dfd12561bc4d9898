#pragma once

#include <string>
#include <vector>

#include "swarm/core.hpp"
#include "swarm/protocol.hpp"

namespace swarm {

struct TcpRamp {
  bool enabled = false;
  double ramp_time = 2.0;          // seconds to reach full share from the floor
  double floor_fraction = 0.3;     // cold-start fraction of the fair share
  double idle_decay_after = 0.04;  // idle seconds before the ramp state resets
};

struct LinkModel {
  double one_way_delay = 0.05;  // seconds, mean
  double delay_jitter = 0.5;    // per-pair delays uniform in mean * [1-j, 1+j]
  TcpRamp tcp;
};

struct Scenario {
  int leecher_count = 40;
  double cap_min = 20 * 1024;   // bytes/s, uniform draw lower bound
  double cap_max = 200 * 1024;  // bytes/s, upper bound
  double seed_capacity = 200 * 1024;
  ChokeConfig choke;
  Bytes content_size = 5 * kMiB;
  Bytes piece_size = 256 * kKiB;
  Bytes subpiece_size = 16 * kKiB;
  Bytes metainfo_fixed_overhead = 400;
  int pipeline_depth = 5;
  // Random tie-breaking is the default: identical lowest-index orders lock
  // the seed's unchoke set onto the same piece under fluid equal-split
  // bandwidth, starving the swarm of fresh pieces at every piece size.
  OrderMode order_mode = OrderMode::random;
  bool endgame = false;
  int peer_set_size = 0;  // 0 = full mesh; otherwise random subset per peer
  LinkModel link;
  std::uint64_t rng_seed = 1;
  int runs = 5;
  bool freeze_capacities = false;
  double watchdog_horizon = 1e5;  // simulated seconds

  // Throws std::invalid_argument with a specific message on any violation.
  void validate() const;
};

struct SweepGrid {
  std::vector<Bytes> content_sizes;  // default {1,5,10,20,50,100} MB
  std::vector<Bytes> piece_sizes;    // default {16 .. 2048} kB

  static SweepGrid defaults();
  void validate() const;
};

// Flat key=value config with dotted keys; '#' starts a comment. Unknown and
// duplicate keys are rejected outright. Missing keys keep the defaults above.
Scenario parse_scenario(const std::string& config_text);

// Grid keys (sweep.content_kb, sweep.piece_kb) from the same config text.
SweepGrid parse_grid(const std::string& config_text);

// Per-run leecher capacity vector. Re-drawn from rng_seed + run unless the
// scenario freezes capacities, in which case run 0's draw is reused.
std::vector<double> leecher_capacities(const Scenario& s, int run_index);

std::uint64_t run_seed(const Scenario& s, int run_index);

}  // namespace swarm
