#pragma once

// Shared scenario builders and independent oracles. Oracles recompute
// expectations from raw state on purpose; they must not reuse the code paths
// they check.

#include <algorithm>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarm/engine.hpp"
#include "swarm/scenario.hpp"

namespace testsupport {

using namespace swarm;

inline Scenario small_scenario(int leechers, Bytes content, Bytes piece,
                               std::uint64_t seed = 1) {
  Scenario s;
  s.leecher_count = leechers;
  s.content_size = content;
  s.piece_size = piece;
  s.subpiece_size = std::min<Bytes>(16 * kKiB, piece);
  s.rng_seed = seed;
  s.runs = 1;
  return s;
}

// Brute-force rarest-first recount straight from the raw bitfields.
// Returns every eligible piece attaining minimal availability.
inline std::vector<PieceIndex> oracle_rarest_fresh(const PeerState& st, PeerId remote) {
  const ConnectionState& conn = st.conn(remote);
  PieceIndex n = st.have().size();
  std::vector<int> counts(n, 0);
  for (const auto& [rid, c] : st.connections())
    if (c.open) c.remote_have.for_each_set([&](PieceIndex p) { ++counts[p]; });

  int best = INT32_MAX;
  std::vector<PieceIndex> argmin;
  for (PieceIndex p = 0; p < n; ++p) {
    if (!conn.remote_have.test(p)) continue;
    if (st.have().test(p)) continue;
    if (st.piece_status(p) != PieceStatus::missing) continue;
    if (counts[p] < best) {
      best = counts[p];
      argmin.assign(1, p);
    } else if (counts[p] == best) {
      argmin.push_back(p);
    }
  }
  return argmin;
}

struct SelectionOracle {
  long checked = 0;
  long failures = 0;
  std::string first_failure;

  void operator()(const SelectionEvent& ev) {
    if (!ev.fresh || !ev.chosen) return;
    ++checked;
    // Fresh picks are only legal when no unclaimed partial was eligible.
    const ConnectionState& conn = ev.peer->conn(ev.remote);
    bool partial_available = false;
    for (const auto& [p, pp] : ev.peer->partials())
      if (ev.peer->piece_status(p) == PieceStatus::partial && conn.remote_have.test(p))
        partial_available = true;
    auto argmin = oracle_rarest_fresh(*ev.peer, ev.remote);
    bool ok = !partial_available;
    if (ok) {
      if (ev.mode == OrderMode::deterministic)
        ok = !argmin.empty() && *ev.chosen == argmin.front();
      else
        ok = std::find(argmin.begin(), argmin.end(), *ev.chosen) != argmin.end();
    }
    if (!ok) {
      ++failures;
      if (first_failure.empty())
        first_failure = "peer " + std::to_string(ev.peer->id()) + " chose " +
                        std::to_string(*ev.chosen) + " from remote " +
                        std::to_string(ev.remote);
    }
  }
};

// Conservation: every leecher downloads the content exactly once.
inline void check_conservation(const MetricsBundle& b) {
  Bytes received = 0;
  for (int i = 0; i < b.leecher_count; ++i) received += b.traffic[i].data_received_bytes;
  received += b.traffic[b.leecher_count].data_received_bytes;  // seed downloads nothing
  Bytes expected = static_cast<Bytes>(b.leecher_count) * b.content_size;
  if (received != expected)
    throw std::runtime_error("conservation broken: received " + std::to_string(received) +
                             " expected " + std::to_string(expected));
  Bytes sent = 0;
  for (const auto& t : b.traffic) sent += t.data_payload_bytes;
  if (sent != expected)
    throw std::runtime_error("ledger asymmetry: sent " + std::to_string(sent) +
                             " expected " + std::to_string(expected));
}

// Deterministic generator of small scenarios for the property suites:
// at most 8 peers and 5 MB of content.
inline Scenario random_small_scenario(std::mt19937& gen) {
  auto pick = [&](auto& list) { return list[gen() % list.size()]; };
  std::vector<Bytes> contents = {256 * kKiB, 512 * kKiB, kMiB, 2 * kMiB, 5 * kMiB};
  std::vector<Bytes> pieces = {16 * kKiB, 32 * kKiB, 64 * kKiB, 128 * kKiB, 512 * kKiB};
  Scenario s;
  s.leecher_count = 1 + static_cast<int>(gen() % 7);
  s.content_size = pick(contents);
  s.piece_size = pick(pieces);
  s.subpiece_size = 16 * kKiB;
  s.choke.upload_slots = 1 + static_cast<int>(gen() % 4);
  s.pipeline_depth = 1 + static_cast<int>(gen() % 8);
  s.link.one_way_delay = (gen() % 3) * 0.025;
  s.link.delay_jitter = (gen() % 2) ? 0.5 : 0.0;
  s.order_mode = (gen() % 2) ? OrderMode::random : OrderMode::deterministic;
  s.link.tcp.enabled = (gen() % 4) == 0;
  s.rng_seed = gen();
  s.runs = 1;
  return s;
}

}  // namespace testsupport
