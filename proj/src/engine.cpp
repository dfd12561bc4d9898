#include "swarm/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <set>
#include <sstream>

namespace swarm {

std::vector<double> allocate_rates(double capacity, const std::vector<double>& multipliers) {
  std::vector<double> rates;
  rates.reserve(multipliers.size());
  if (multipliers.empty()) return rates;
  double share = capacity / static_cast<double>(multipliers.size());
  for (double m : multipliers) rates.push_back(share * m);
  return rates;
}

double tcp_multiplier(double idle_seconds, double continuous_active, const TcpRamp& model) {
  if (!model.enabled) return 1.0;
  if (idle_seconds > model.idle_decay_after) continuous_active = 0;
  return std::min(1.0, model.floor_fraction +
                           (1.0 - model.floor_fraction) * continuous_active / model.ramp_time);
}

Simulation::Simulation(const Scenario& scenario, int run_index)
    : sc_(scenario),
      spec_(scenario.content_size, scenario.piece_size, scenario.subpiece_size,
            scenario.metainfo_fixed_overhead),
      n_(scenario.leecher_count + 1),
      seed_id_(scenario.leecher_count),
      rng_(run_seed(scenario, run_index)) {
  sc_.validate();
  auto caps = leecher_capacities(sc_, run_index);
  if (!sc_.freeze_capacities) {
    // leecher_capacities re-draws from the same run seed; keep this rng in
    // step with it so runtime draws do not replay the capacity draws.
    for (int i = 0; i < sc_.leecher_count; ++i) rng_.u64();
  }

  peers_.reserve(n_);
  for (int i = 0; i < sc_.leecher_count; ++i)
    peers_.emplace_back(i, Role::leecher, spec_, caps[i]);
  peers_.emplace_back(seed_id_, Role::seed, spec_, sc_.seed_capacity);

  delays_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
  for (PeerId i = 0; i < n_; ++i)
    for (PeerId j = i + 1; j < n_; ++j) {
      double d = sc_.link.one_way_delay;
      if (sc_.link.delay_jitter > 0 && d > 0)
        d *= rng_.uniform(1.0 - sc_.link.delay_jitter, 1.0 + sc_.link.delay_jitter);
      delays_[i * n_ + j] = d;
      delays_[j * n_ + i] = d;
    }

  flows_.resize(n_);
  departed_.assign(n_, false);
  seed_sent_subpieces_.resize(spec_.piece_count());
  seed_piece_first_done_.assign(spec_.piece_count(), false);
  active_leechers_ = sc_.leecher_count;

  bundle_.leecher_count = sc_.leecher_count;
  bundle_.content_size = sc_.content_size;
  bundle_.piece_size = sc_.piece_size;
  bundle_.subpiece_size = sc_.subpiece_size;
  bundle_.leecher_capacities = caps;
  bundle_.completion_times.assign(sc_.leecher_count, 0.0);
  bundle_.traffic.assign(n_, PeerTraffic{});
}

void Simulation::schedule(SimEvent ev) {
  ev.seq = next_seq_++;
  queue_.push(ev);
}

void Simulation::trace(TraceKind kind, PeerId from, PeerId to, const WireMessage& msg) {
  if (on_trace) on_trace(TraceEvent{now_, kind, from, to, msg});
}

void Simulation::count_sent(PeerId from, PeerId /*to*/, const WireMessage& msg) {
  Bytes size = message_wire_size(msg, spec_);
  PeerTraffic& t = bundle_.traffic[from];
  switch (msg.kind) {
    case MsgKind::bitfield: t.bitfield_bytes += size; break;
    case MsgKind::have: t.have_bytes += size; break;
    case MsgKind::piece_data: break;  // counted at transfer completion
    default: t.other_control_bytes += size; break;
  }
}

void Simulation::send_message(PeerId from, PeerId to, const WireMessage& msg) {
  count_sent(from, to, msg);
  trace(TraceKind::send, from, to, msg);
  SimEvent ev;
  ev.time = now_ + pair_delay(from, to);
  ev.kind = EvKind::message_delivery;
  ev.a = from;
  ev.b = to;
  ev.msg = msg;
  schedule(ev);
}

void Simulation::establish(PeerId i, PeerId j) {
  peers_[i].add_connection(j);
  peers_[j].add_connection(i);
  send_message(i, j, WireMessage::make(MsgKind::handshake));
  send_message(j, i, WireMessage::make(MsgKind::handshake));
  send_message(i, j, WireMessage::make(MsgKind::bitfield));
  send_message(j, i, WireMessage::make(MsgKind::bitfield));
}

void Simulation::build_topology() {
  if (sc_.peer_set_size <= 0 || sc_.peer_set_size >= n_ - 1) {
    for (PeerId i = 0; i < n_; ++i)
      for (PeerId j = i + 1; j < n_; ++j) establish(i, j);
    return;
  }
  // Random peer sets: each peer draws peer_set_size distinct neighbours; the
  // edge set is the union, so degrees may exceed the draw size.
  std::set<std::pair<PeerId, PeerId>> edges;
  for (PeerId i = 0; i < n_; ++i) {
    std::set<PeerId> chosen;
    while (static_cast<int>(chosen.size()) < sc_.peer_set_size) {
      PeerId j = static_cast<PeerId>(rng_.below(n_));
      if (j != i) chosen.insert(j);
    }
    for (PeerId j : chosen) edges.insert({std::min(i, j), std::max(i, j)});
  }
  for (const auto& [i, j] : edges) establish(i, j);
}

MetricsBundle Simulation::run() {
  if (sc_.leecher_count == 0) return bundle_;

  build_topology();
  for (PeerId p = 0; p < n_; ++p) {
    SimEvent ev;
    ev.time = sc_.choke.rechoke_period;
    ev.kind = EvKind::rechoke_tick;
    ev.a = p;
    schedule(ev);
  }
  {
    SimEvent ev;
    ev.time = kUtilizationWindow;
    ev.kind = EvKind::metric_tick;
    schedule(ev);
  }

  while (!queue_.empty()) {
    SimEvent ev = queue_.top();
    queue_.pop();
    if (ev.time > sc_.watchdog_horizon) watchdog_failure(ev);
    assert(ev.time >= now_ - 1e-9);
    now_ = std::max(now_, ev.time);
    ++bundle_.events_processed;
    process(ev);
  }

  if (active_leechers_ != 0)
    throw SimError("event queue drained with " + std::to_string(active_leechers_) +
                   " leechers incomplete");
  for (double t : bundle_.completion_times) bundle_.end_time = std::max(bundle_.end_time, t);
  return bundle_;
}

void Simulation::watchdog_failure(const SimEvent& next) {
  std::ostringstream out;
  out << "watchdog: simulated time exceeded " << sc_.watchdog_horizon << " s\n";
  out << "  now=" << now_ << " queue_size=" << queue_.size() + 1 << "\n";
  out << "  next events:";
  SimEvent ev = next;
  for (int i = 0; i < 8; ++i) {
    out << " (t=" << ev.time << " kind=" << static_cast<int>(ev.kind) << " a=" << ev.a
        << " b=" << ev.b << ")";
    if (queue_.empty()) break;
    ev = queue_.top();
    queue_.pop();
  }
  out << "\n  leecher progress:";
  for (int i = 0; i < sc_.leecher_count; ++i)
    out << " " << i << ":" << peers_[i].have().count() << "/" << spec_.piece_count();
  throw SimError(out.str());
}

void Simulation::process(const SimEvent& ev) {
  switch (ev.kind) {
    case EvKind::message_delivery: on_delivery(ev); break;
    case EvKind::transfer_complete: on_transfer_complete(ev); break;
    case EvKind::rechoke_tick: on_rechoke(ev.a); break;
    case EvKind::metric_tick: on_metric_tick(); break;
    case EvKind::peer_departed:
      if (ev.b >= 0) on_close_notice(ev.a, ev.b);
      else on_departed(ev.a);
      break;
  }
}

void Simulation::on_metric_tick() {
  // Windows are integrated as flows move; this tick just keeps the clock
  // advancing so a stalled swarm reaches the watchdog horizon.
  if (active_leechers_ > 0) {
    SimEvent ev;
    ev.time = now_ + kUtilizationWindow;
    ev.kind = EvKind::metric_tick;
    schedule(ev);
  }
}

void Simulation::on_delivery(const SimEvent& ev) {
  PeerState& receiver = peers_[ev.b];
  if (!receiver.connected() || !receiver.has_connection(ev.a) ||
      !receiver.conn(ev.a).open) {
    ++bundle_.dropped_deliveries;
    trace(TraceKind::drop, ev.a, ev.b, ev.msg);
    return;
  }
  trace(TraceKind::deliver, ev.a, ev.b, ev.msg);

  switch (ev.msg.kind) {
    case MsgKind::bitfield: {
      HandleResult res = receiver.handle_bitfield(ev.a, peers_[ev.a].have());
      apply_effects(ev.b, res);
      return;
    }
    case MsgKind::request:
      on_request(ev.b, ev.a, ev.msg);
      return;
    case MsgKind::piece_data:
      on_piece_data(ev);
      return;
    default: break;
  }

  HandleResult res = receiver.handle_message(ev.a, ev.msg, sc_.endgame);
  apply_effects(ev.b, res);
  switch (ev.msg.kind) {
    case MsgKind::interested:
      eager_unchoke(ev.b, ev.a);
      break;
    case MsgKind::unchoke:
    case MsgKind::have:
      kick(ev.b, ev.a);
      break;
    case MsgKind::choke:
      // The released piece may be adoptable on another connection.
      kick_all_idle(ev.b);
      break;
    default: break;
  }
}

void Simulation::on_request(PeerId uploader, PeerId requester, const WireMessage& msg) {
  ConnectionState& c = peers_[uploader].conn(requester);
  if (c.am_choking ||
      now_ + 1e-9 < c.last_choke_sent + 2 * pair_delay(uploader, requester)) {
    // Stale request racing a choke; the requester re-issues after unchoke.
    ++bundle_.ignored_requests;
    return;
  }
  if (!peers_[uploader].have().test(msg.piece))
    throw ProtocolViolation("request for piece " + std::to_string(msg.piece) +
                            " that peer " + std::to_string(uploader) + " does not hold");
  grant(uploader, requester, SubpieceRef{msg.piece, msg.offset, msg.length});
}

void Simulation::on_piece_data(const SimEvent& ev) {
  PeerState& receiver = peers_[ev.b];
  receiver.conn(ev.a).bytes_from_cur += static_cast<double>(ev.msg.length);
  HandleResult res = receiver.handle_message(ev.a, ev.msg, sc_.endgame);
  apply_effects(ev.b, res);
  if (res.finished) {
    SimEvent dep;
    dep.time = now_;
    dep.kind = EvKind::peer_departed;
    dep.a = ev.b;
    schedule(dep);
    return;
  }
  if (res.completed_piece) {
    // Claims on the finished piece dissolved; idle connections may now adopt
    // released partials, and this connection picks its next piece.
    kick_all_idle(ev.b);
  } else {
    kick(ev.b, ev.a);
  }
}

void Simulation::apply_effects(PeerId p, const HandleResult& res) {
  for (const auto& e : res.send) send_message(p, e.to, e.msg);
  for (const auto& r : res.revoke) revoke_grant(r.sender, p, r.sub);
}

void Simulation::eager_unchoke(PeerId p, PeerId remote) {
  PeerState& st = peers_[p];
  ConnectionState& c = st.conn(remote);
  if (!c.am_choking) return;
  if (st.unchoked_count() >= sc_.choke.upload_slots) return;
  c.am_choking = false;
  send_message(p, remote, WireMessage::make(MsgKind::unchoke));
}

void Simulation::kick(PeerId p, PeerId remote) {
  PeerState& st = peers_[p];
  if (!st.connected() || st.role() == Role::seed) return;
  ConnectionState& c = st.conn(remote);
  if (!c.open || c.peer_choking || !c.am_interested) return;

  if (!c.current_piece) {
    auto choice = select_next_piece(st, remote, sc_.order_mode, rng_);
    bool endgame_claim = false;
    bool fresh = choice && st.piece_status(*choice) == PieceStatus::missing;
    if (choice) {
      if (on_selection) on_selection({&st, remote, sc_.order_mode, choice, fresh});
      if (fresh) ++bundle_.fresh_selections;
    } else if (sc_.endgame && !st.complete()) {
      choice = select_endgame_piece(st, remote, sc_.order_mode, rng_);
      endgame_claim = true;
      if (choice && on_selection) on_selection({&st, remote, sc_.order_mode, choice, false});
    }
    if (!choice) return;
    st.begin_piece(remote, *choice, endgame_claim);
  }

  PieceIndex piece = *c.current_piece;
  PieceLayout layout = spec_.subpiece_layout(piece);
  auto reqs = next_subpiece_requests(c, st.partial(piece), layout, sc_.pipeline_depth);
  for (const auto& r : reqs) {
    c.outstanding.push_back(r);
    send_message(p, remote, WireMessage::make_request(r.piece, r.offset, r.length));
  }
  int outstanding = static_cast<int>(c.outstanding.size());
  bundle_.max_outstanding = std::max(bundle_.max_outstanding, outstanding);
  if (outstanding > sc_.pipeline_depth)
    throw SimError("pipeline depth exceeded on connection " + std::to_string(p) + "->" +
                   std::to_string(remote));
  for (const auto& r : c.outstanding)
    if (r.piece != piece)
      throw SimError("outstanding requests span two pieces on connection " +
                     std::to_string(p) + "->" + std::to_string(remote));
}

void Simulation::kick_all_idle(PeerId p) {
  PeerState& st = peers_[p];
  if (!st.connected() || st.role() == Role::seed) return;
  for (auto& [remote, c] : st.connections())
    if (c.open && !c.peer_choking && c.am_interested && !c.current_piece) kick(p, remote);
}

void Simulation::on_rechoke(PeerId p) {
  PeerState& st = peers_[p];
  if (!st.connected() || active_leechers_ == 0) return;  // swarm is done, stop ticking

  double window = std::min(now_, 2.0 * sc_.choke.rechoke_period);
  std::vector<RatedPeer> interested;
  for (auto& [remote, c] : st.connections()) {
    if (window > 0) {
      c.rate_from_remote = (c.bytes_from_cur + c.bytes_from_prev) / window;
      c.rate_to_remote = (c.bytes_to_cur + c.bytes_to_prev) / window;
    }
    c.bytes_from_prev = c.bytes_from_cur;
    c.bytes_from_cur = 0;
    c.bytes_to_prev = c.bytes_to_cur;
    c.bytes_to_cur = 0;
    if (c.open && c.peer_interested)
      interested.push_back(
          {remote, st.role() == Role::seed ? c.rate_to_remote : c.rate_from_remote});
  }

  std::vector<PeerId> unchoke =
      st.role() == Role::seed
          ? rechoke_seed(interested, sc_.choke)
          : rechoke_leecher(interested, sc_.choke, st.next_rechoke_tick(),
                            st.optimistic_peer, rng_);

  std::set<PeerId> target(unchoke.begin(), unchoke.end());
  for (auto& [remote, c] : st.connections()) {
    if (!c.open) continue;
    bool want = target.count(remote) != 0;
    if (want && c.am_choking) {
      c.am_choking = false;
      send_message(p, remote, WireMessage::make(MsgKind::unchoke));
    } else if (!want && !c.am_choking) {
      c.am_choking = true;
      c.last_choke_sent = now_;
      // Granted but undelivered subpieces die with the choke; the receiver
      // clears its side when the choke message lands.
      kill_flow(p, remote);
      send_message(p, remote, WireMessage::make(MsgKind::choke));
    }
  }
  if (st.unchoked_count() > sc_.choke.upload_slots)
    throw SimError("unchoke set exceeds upload_slots at peer " + std::to_string(p));

  SimEvent next;
  next.time = now_ + sc_.choke.rechoke_period;
  next.kind = EvKind::rechoke_tick;
  next.a = p;
  schedule(next);
}

void Simulation::grant(PeerId sender, PeerId receiver, const SubpieceRef& sub) {
  auto& table = flows_[sender];
  auto it = table.find(receiver);
  if (it != table.end()) {
    it->second.queue.push_back(sub);
    return;
  }
  Flow flow;
  flow.queue.push_back(sub);
  flow.last_update = now_;
  it = table.emplace(receiver, std::move(flow)).first;
  start_front(sender, receiver, it->second);
  reallocate(sender);
}

void Simulation::start_front(PeerId sender, PeerId receiver, Flow& flow) {
  const SubpieceRef& front = flow.queue.front();
  flow.remaining = static_cast<double>(front.length);
  flow.subpiece_start = now_;
  flow.last_update = now_;
  ConnectionState& c = peers_[sender].conn(receiver);
  double idle = now_ - c.tcp_last_end;
  flow.multiplier = tcp_multiplier(idle, c.tcp_active_run, sc_.link.tcp);
  if (sc_.link.tcp.enabled && idle > sc_.link.tcp.idle_decay_after) c.tcp_active_run = 0;
  trace(TraceKind::flow_start, sender, receiver,
        WireMessage::make_piece(front.piece, front.offset, front.length));
}

void Simulation::true_up(PeerId sender, Flow& flow) {
  double dt = now_ - flow.last_update;
  if (dt > 0 && flow.rate > 0) {
    double moved = flow.rate * dt;
    flow.remaining -= moved;
    if (flow.remaining < -1e-6)
      throw SimError("flow accounting went negative at sender " + std::to_string(sender));
    if (flow.remaining < 0) flow.remaining = 0;
    if (sender != seed_id_)
      add_upload_span(bundle_.window_upload_bytes, flow.last_update, now_, moved);
  }
  flow.last_update = now_;
}

void Simulation::reschedule_one(PeerId sender, PeerId receiver, Flow& flow) {
  flow.rate = capacity(sender) / static_cast<double>(flows_[sender].size()) * flow.multiplier;
  flow.version = ++next_version_;
  SimEvent ev;
  ev.time = now_ + flow.remaining / flow.rate;
  ev.kind = EvKind::transfer_complete;
  ev.a = sender;
  ev.b = receiver;
  ev.flow_version = flow.version;
  schedule(ev);
}

void Simulation::reallocate(PeerId sender) {
  auto& table = flows_[sender];
  if (table.empty()) return;
  double total = 0;
  for (auto& [receiver, flow] : table) {
    true_up(sender, flow);
    reschedule_one(sender, receiver, flow);
    total += flow.rate;
  }
  if (total > capacity(sender) * (1.0 + 1e-9))
    throw SimError("sender " + std::to_string(sender) + " exceeds its upload capacity");
}

void Simulation::on_transfer_complete(const SimEvent& ev) {
  auto& table = flows_[ev.a];
  auto it = table.find(ev.b);
  if (it == table.end() || it->second.version != ev.flow_version) return;  // stale
  Flow& flow = it->second;
  true_up(ev.a, flow);
  flow.remaining = 0;

  SubpieceRef sub = flow.queue.front();
  flow.queue.pop_front();
  trace(TraceKind::flow_end, ev.a, ev.b, WireMessage::make_piece(sub.piece, sub.offset, sub.length));

  PeerTraffic& t = bundle_.traffic[ev.a];
  t.data_payload_bytes += sub.length;
  t.data_header_bytes += message_wire_size(MsgKind::piece_data, spec_, sub.length) - sub.length;
  bundle_.traffic[ev.b].data_received_bytes += sub.length;
  peers_[ev.a].conn(ev.b).bytes_to_cur += static_cast<double>(sub.length);
  if (ev.a == seed_id_) record_seed_subpiece(ev.b, sub);

  ConnectionState& c = peers_[ev.a].conn(ev.b);
  c.tcp_active_run += now_ - flow.subpiece_start;
  c.tcp_last_end = now_;

  SimEvent delivery;
  delivery.time = now_ + pair_delay(ev.a, ev.b);
  delivery.kind = EvKind::message_delivery;
  delivery.a = ev.a;
  delivery.b = ev.b;
  delivery.msg = WireMessage::make_piece(sub.piece, sub.offset, sub.length);
  schedule(delivery);

  if (!flow.queue.empty()) {
    start_front(ev.a, ev.b, flow);
    reschedule_one(ev.a, ev.b, flow);
  } else {
    table.erase(it);
    reallocate(ev.a);
  }
}

void Simulation::kill_flow(PeerId sender, PeerId receiver) {
  auto& table = flows_[sender];
  auto it = table.find(receiver);
  if (it == table.end()) return;
  Flow& flow = it->second;
  true_up(sender, flow);
  ConnectionState& c = peers_[sender].conn(receiver);
  c.tcp_active_run += now_ - flow.subpiece_start;
  c.tcp_last_end = now_;
  trace(TraceKind::flow_end, sender, receiver, WireMessage::make(MsgKind::choke));
  table.erase(it);
  reallocate(sender);
}

void Simulation::revoke_grant(PeerId sender, PeerId receiver, const SubpieceRef& sub) {
  auto& table = flows_[sender];
  auto it = table.find(receiver);
  if (it == table.end()) return;
  Flow& flow = it->second;
  // The in-flight front is left to finish; the receiver discards the
  // duplicate on arrival.
  for (std::size_t i = 1; i < flow.queue.size(); ++i) {
    if (flow.queue[i] == sub) {
      flow.queue.erase(flow.queue.begin() + i);
      break;
    }
  }
}

void Simulation::record_seed_subpiece(PeerId receiver, const SubpieceRef& sub) {
  int n = spec_.subpiece_count(sub.piece);
  int si = static_cast<int>(sub.offset / spec_.subpiece_size());

  auto& ever = seed_sent_subpieces_[sub.piece];
  if (ever.empty()) ever.assign(n, false);
  if (ever[si]) bundle_.seed_duplicate_subpiece_bytes += sub.length;
  else ever[si] = true;

  auto key = std::make_pair(receiver, sub.piece);
  auto& prog = seed_progress_[key];
  if (prog.sent.empty()) prog.sent.assign(n, false);
  if (!prog.sent[si]) {
    prog.sent[si] = true;
    ++prog.count;
  }
  if (prog.count == n) {
    bool first = !seed_piece_first_done_[sub.piece];
    if (first) {
      seed_piece_first_done_[sub.piece] = true;
      ++seed_unique_pieces_;
    }
    bundle_.seed_piece_log.push_back({now_, sub.piece, first});
    seed_progress_.erase(key);
  }
}

void Simulation::on_close_notice(PeerId gone, PeerId neighbour) {
  PeerState& st = peers_[neighbour];
  if (!st.connected() || !st.has_connection(gone) || !st.conn(gone).open) return;
  kill_flow(neighbour, gone);
  st.close_connection(gone);
  kick_all_idle(neighbour);
}

void Simulation::on_departed(PeerId p) {
  if (departed_[p]) return;
  departed_[p] = true;
  PeerState& st = peers_[p];
  assert(!st.connected() && st.complete());
  bundle_.completion_times[p] = now_;
  trace(TraceKind::depart, p, -1, WireMessage{});

  std::vector<PeerId> neighbours;
  for (auto& [remote, c] : st.connections())
    if (c.open) neighbours.push_back(remote);
  for (PeerId r : neighbours) {
    // p stops sending and receiving instantly; transfers already completed
    // stay deliverable because the neighbour's half closes only when the
    // close notice reaches it, one delay later.
    kill_flow(p, r);
    kill_flow(r, p);
    st.close_connection(r);
    SimEvent notice;
    notice.time = now_ + pair_delay(p, r);
    notice.kind = EvKind::peer_departed;
    notice.a = p;
    notice.b = r;
    schedule(notice);
  }
  --active_leechers_;
}

}  // namespace swarm
