#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <vector>

#include "swarm/content.hpp"
#include "swarm/core.hpp"
#include "swarm/metrics.hpp"
#include "swarm/protocol.hpp"
#include "swarm/scenario.hpp"

namespace swarm {

enum class EvKind : std::uint8_t {
  message_delivery,
  transfer_complete,
  rechoke_tick,
  metric_tick,
  peer_departed,
};

struct SimEvent {
  double time = 0;
  std::uint64_t seq = 0;  // unique; breaks ties at equal times
  EvKind kind = EvKind::metric_tick;
  PeerId a = -1;  // from, or the peer for ticks/departures
  PeerId b = -1;  // to
  WireMessage msg;
  std::uint64_t flow_version = 0;
};

// One busy connection: the front subpiece is in flight, the rest are granted
// and queued behind it. Pipelined grants to the same receiver share one flow,
// so they never multiply the receiver's share of the sender's capacity.
struct Flow {
  std::deque<SubpieceRef> queue;
  double remaining = 0;  // bytes left of the front subpiece
  double rate = 0;       // bytes/s
  double multiplier = 1.0;
  double last_update = 0;
  double subpiece_start = 0;
  std::uint64_t version = 0;  // stale completion events are dropped
};

// Equal split of the sender's capacity, then per-flow scaling. Slack from
// multipliers below 1 is deliberately not redistributed.
std::vector<double> allocate_rates(double capacity, const std::vector<double>& multipliers);

// Congestion-window ramp: cold connections start at floor_fraction of their
// share and reach it linearly over ramp_time of continuous activity. An idle
// gap longer than idle_decay_after resets the ramp.
double tcp_multiplier(double idle_seconds, double continuous_active, const TcpRamp& model);

enum class TraceKind : std::uint8_t {
  send,
  deliver,
  drop,
  flow_start,
  flow_end,
  depart,
};

struct TraceEvent {
  double time = 0;
  TraceKind kind = TraceKind::send;
  PeerId from = -1;
  PeerId to = -1;
  WireMessage msg;
};

struct SelectionEvent {
  const PeerState* peer = nullptr;
  PeerId remote = -1;
  OrderMode mode = OrderMode::deterministic;
  std::optional<PieceIndex> chosen;
  bool fresh = false;  // false for partial-piece adoption and endgame picks
};

// One deterministic simulation run: flash crowd at t=0, full mesh by default,
// drains until every leecher has departed.
class Simulation {
 public:
  Simulation(const Scenario& scenario, int run_index);

  MetricsBundle run();

  // Test hooks; both default to disabled.
  std::function<void(const TraceEvent&)> on_trace;
  std::function<void(const SelectionEvent&)> on_selection;

  const TorrentSpec& torrent() const { return spec_; }
  const PeerState& peer(PeerId id) const { return peers_[id]; }
  PeerId seed_id() const { return seed_id_; }
  double pair_delay(PeerId x, PeerId y) const { return delays_[x * n_ + y]; }

 private:
  struct EventCmp {
    bool operator()(const SimEvent& x, const SimEvent& y) const {
      if (x.time != y.time) return x.time > y.time;
      return x.seq > y.seq;
    }
  };

  struct SeedPieceProgress {
    std::vector<bool> sent;
    int count = 0;
  };

  void build_topology();
  void establish(PeerId i, PeerId j);
  void schedule(SimEvent ev);
  void send_message(PeerId from, PeerId to, const WireMessage& msg);
  void count_sent(PeerId from, PeerId to, const WireMessage& msg);
  void trace(TraceKind kind, PeerId from, PeerId to, const WireMessage& msg);

  void process(const SimEvent& ev);
  void on_delivery(const SimEvent& ev);
  void on_request(PeerId uploader, PeerId requester, const WireMessage& msg);
  void on_piece_data(const SimEvent& ev);
  void on_transfer_complete(const SimEvent& ev);
  void on_rechoke(PeerId p);
  void on_metric_tick();
  void on_departed(PeerId p);
  void on_close_notice(PeerId gone, PeerId neighbour);

  void apply_effects(PeerId p, const HandleResult& res);
  void eager_unchoke(PeerId p, PeerId remote);
  void kick(PeerId p, PeerId remote);
  void kick_all_idle(PeerId p);

  double capacity(PeerId p) const { return peers_[p].upload_capacity(); }
  void grant(PeerId sender, PeerId receiver, const SubpieceRef& sub);
  void start_front(PeerId sender, PeerId receiver, Flow& flow);
  void true_up(PeerId sender, Flow& flow);
  void reallocate(PeerId sender);
  void reschedule_one(PeerId sender, PeerId receiver, Flow& flow);
  void kill_flow(PeerId sender, PeerId receiver);
  void revoke_grant(PeerId sender, PeerId receiver, const SubpieceRef& sub);
  void record_seed_subpiece(PeerId receiver, const SubpieceRef& sub);
  [[noreturn]] void watchdog_failure(const SimEvent& next);

  Scenario sc_;
  TorrentSpec spec_;
  int n_ = 0;
  PeerId seed_id_ = 0;
  Rng rng_;
  double now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_version_ = 0;
  int active_leechers_ = 0;

  std::vector<PeerState> peers_;
  std::vector<double> delays_;                 // per ordered pair, symmetric
  std::vector<std::map<PeerId, Flow>> flows_;  // indexed by sender
  std::priority_queue<SimEvent, std::vector<SimEvent>, EventCmp> queue_;

  MetricsBundle bundle_;
  std::vector<std::vector<bool>> seed_sent_subpieces_;
  std::vector<bool> seed_piece_first_done_;
  int seed_unique_pieces_ = 0;
  std::map<std::pair<PeerId, PieceIndex>, SeedPieceProgress> seed_progress_;
  std::vector<bool> departed_;
};

}  // namespace swarm
