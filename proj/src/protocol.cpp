#include "swarm/protocol.hpp"

#include <algorithm>
#include <cassert>
#include <climits>
#include <string>

namespace swarm {

PeerState::PeerState(PeerId id, Role role, const TorrentSpec& spec, double upload_capacity)
    : id_(id),
      role_(role),
      spec_(spec),
      upload_capacity_(upload_capacity),
      have_(spec.piece_count(), role == Role::seed),
      availability_(spec.piece_count(), 0),
      piece_status_(spec.piece_count(),
                    role == Role::seed ? PieceStatus::held : PieceStatus::missing) {}

void PeerState::add_connection(PeerId remote) {
  ConnectionState c;
  c.remote = remote;
  c.open = true;
  c.remote_have = Bitfield(spec_.piece_count());
  conns_[remote] = std::move(c);
}

void PeerState::close_connection(PeerId remote) {
  auto it = conns_.find(remote);
  if (it == conns_.end() || !it->second.open) return;
  ConnectionState& c = it->second;
  if (c.current_piece) release_piece(remote);
  c.remote_have.for_each_set([&](PieceIndex p) { --availability_[p]; });
  c.open = false;
}

int PeerState::unchoked_count() const {
  int n = 0;
  for (const auto& [rid, c] : conns_)
    if (c.open && !c.am_choking) ++n;
  return n;
}

void PeerState::begin_piece(PeerId remote, PieceIndex p, bool endgame_claim) {
  ConnectionState& c = conns_.at(remote);
  assert(!c.current_piece);
  c.current_piece = p;
  c.endgame_claim = endgame_claim;
  if (!endgame_claim) {
    assert(piece_status_[p] == PieceStatus::missing || piece_status_[p] == PieceStatus::partial);
    piece_status_[p] = PieceStatus::claimed;
  }
}

void PeerState::release_piece(PeerId remote) {
  ConnectionState& c = conns_.at(remote);
  if (!c.current_piece) return;
  PieceIndex p = *c.current_piece;
  c.outstanding.clear();
  if (!c.endgame_claim && piece_status_[p] == PieceStatus::claimed)
    piece_status_[p] = partials_.count(p) ? PieceStatus::partial : PieceStatus::missing;
  c.current_piece.reset();
  c.endgame_claim = false;
}

const PartialPiece* PeerState::partial(PieceIndex p) const {
  auto it = partials_.find(p);
  return it == partials_.end() ? nullptr : &it->second;
}

PartialPiece& PeerState::partial_for(PieceIndex p, int subpiece_count) {
  auto it = partials_.find(p);
  if (it == partials_.end()) {
    PartialPiece pp;
    pp.received.assign(subpiece_count, false);
    it = partials_.emplace(p, std::move(pp)).first;
  }
  return it->second;
}

bool PeerState::claimed_elsewhere(PieceIndex p, PeerId remote) const {
  for (const auto& [rid, c] : conns_)
    if (rid != remote && c.open && c.current_piece && *c.current_piece == p) return true;
  return false;
}

std::vector<int> PeerState::recount_availability() const {
  std::vector<int> counts(spec_.piece_count(), 0);
  for (const auto& [rid, c] : conns_)
    if (c.open) c.remote_have.for_each_set([&](PieceIndex p) { ++counts[p]; });
  return counts;
}

void PeerState::update_interest(ConnectionState& c, HandleResult& out) {
  bool want = c.wanted_count > 0;
  if (want == c.am_interested) return;
  c.am_interested = want;
  out.send.push_back(
      {c.remote, WireMessage::make(want ? MsgKind::interested : MsgKind::not_interested)});
}

void PeerState::apply_remote_bitfield(ConnectionState& c, const Bitfield& bits,
                                      HandleResult& out) {
  assert(bits.size() == spec_.piece_count());
  assert(c.remote_have.none());
  c.remote_have = bits;
  c.wanted_count = 0;
  bits.for_each_set([&](PieceIndex p) {
    ++availability_[p];
    if (!have_.test(p)) ++c.wanted_count;
  });
  update_interest(c, out);
}

void PeerState::apply_remote_have(ConnectionState& c, PieceIndex p, HandleResult& out) {
  if (!c.remote_have.set(p)) return;
  ++availability_[p];
  if (!have_.test(p)) {
    ++c.wanted_count;
    update_interest(c, out);
  }
}

void PeerState::record_subpiece(ConnectionState& c, const WireMessage& msg, bool endgame,
                                HandleResult& out) {
  SubpieceRef ref{msg.piece, msg.offset, msg.length};
  auto pos = std::find(c.outstanding.begin(), c.outstanding.end(), ref);
  if (pos == c.outstanding.end()) {
    if (endgame) {
      // A duplicate whose request was revoked after the data went in flight.
      auto it = partials_.find(msg.piece);
      int sub = static_cast<int>(msg.offset / spec_.subpiece_size());
      if (have_.test(msg.piece) ||
          (it != partials_.end() && it->second.received[sub]))
        return;
    }
    throw ProtocolViolation("peer " + std::to_string(id_) + ": piece_data " +
                            std::to_string(msg.piece) + "+" + std::to_string(msg.offset) +
                            " from " + std::to_string(c.remote) + " was never requested");
  }
  c.outstanding.erase(pos);

  if (have_.test(msg.piece)) return;  // endgame: piece finished elsewhere

  int n = spec_.subpiece_count(msg.piece);
  int sub = static_cast<int>(msg.offset / spec_.subpiece_size());
  PartialPiece& pp = partial_for(msg.piece, n);
  if (pp.received[sub]) {
    if (!endgame)
      throw ProtocolViolation("duplicate subpiece delivery in default mode");
    return;
  }
  pp.received[sub] = true;
  ++pp.received_count;

  if (endgame) {
    // Cancel-on-receipt: revoke the same subpiece wherever else it is pending.
    for (auto& [rid, c2] : conns_) {
      if (&c2 == &c || !c2.open) continue;
      auto dup = std::find(c2.outstanding.begin(), c2.outstanding.end(), ref);
      if (dup != c2.outstanding.end()) {
        c2.outstanding.erase(dup);
        out.revoke.push_back({rid, ref});
      }
    }
  }

  if (pp.received_count < n) return;

  // Piece complete: it becomes announceable and every claim on it dissolves.
  partials_.erase(msg.piece);
  piece_status_[msg.piece] = PieceStatus::held;
  have_.set(msg.piece);
  for (auto& [rid, c2] : conns_) {
    if (c2.current_piece && *c2.current_piece == msg.piece) {
      for (const auto& o : c2.outstanding) out.revoke.push_back({rid, o});
      c2.outstanding.clear();
      c2.current_piece.reset();
      c2.endgame_claim = false;
    }
  }
  out.completed_piece = msg.piece;
  for (auto& [rid, c2] : conns_) {
    if (!c2.open) continue;
    out.send.push_back({rid, WireMessage::make_have(msg.piece)});
    if (c2.remote_have.test(msg.piece)) {
      --c2.wanted_count;
      update_interest(c2, out);
    }
  }
  if (have_.all()) {
    out.finished = true;
    connected_ = false;
  }
}

HandleResult PeerState::handle_message(PeerId from, const WireMessage& msg, bool endgame) {
  HandleResult out;
  ConnectionState& c = conns_.at(from);
  switch (msg.kind) {
    case MsgKind::handshake:
    case MsgKind::keepalive:
      break;
    case MsgKind::choke:
      c.peer_choking = true;
      release_piece(from);  // pending requests are void
      break;
    case MsgKind::unchoke:
      c.peer_choking = false;
      break;
    case MsgKind::interested:
      c.peer_interested = true;
      break;
    case MsgKind::not_interested:
      c.peer_interested = false;
      break;
    case MsgKind::have:
      apply_remote_have(c, msg.piece, out);
      break;
    case MsgKind::piece_data:
      record_subpiece(c, msg, endgame, out);
      break;
    case MsgKind::bitfield:
    case MsgKind::request:
      throw std::logic_error("message kind handled by the engine, not PeerState");
  }
  return out;
}

HandleResult PeerState::handle_bitfield(PeerId from, const Bitfield& bits) {
  HandleResult out;
  apply_remote_bitfield(conns_.at(from), bits, out);
  return out;
}

namespace {

struct Picker {
  OrderMode mode;
  int best_avail = INT32_MAX;
  PieceIndex best = -1;
  std::vector<PieceIndex> ties;

  void offer(PieceIndex p, int avail) {
    if (avail > best_avail) return;
    if (avail < best_avail) {
      best_avail = avail;
      best = p;
      if (mode == OrderMode::random) {
        ties.clear();
        ties.push_back(p);
      }
    } else if (mode == OrderMode::random) {
      ties.push_back(p);
    }
    // deterministic mode: first offer at min availability wins (ascending scan)
  }

  std::optional<PieceIndex> take(Rng& rng) {
    if (best < 0) return std::nullopt;
    if (mode == OrderMode::random) return ties[rng.below(ties.size())];
    return best;
  }
};

}  // namespace

std::optional<PieceIndex> select_next_piece(const PeerState& state, PeerId remote,
                                            OrderMode mode, Rng& rng) {
  const ConnectionState& c = state.conn(remote);
  Picker picker{mode, INT32_MAX, -1, {}};

  // Partially downloaded pieces first.
  for (const auto& [p, pp] : state.partials())
    if (state.piece_status(p) == PieceStatus::partial && c.remote_have.test(p))
      picker.offer(p, state.availability(p));
  if (auto got = picker.take(rng)) return got;

  c.remote_have.for_each_set([&](PieceIndex p) {
    if (state.piece_status(p) == PieceStatus::missing) picker.offer(p, state.availability(p));
  });
  return picker.take(rng);
}

std::optional<PieceIndex> select_endgame_piece(const PeerState& state, PeerId remote,
                                               OrderMode mode, Rng& rng) {
  const ConnectionState& c = state.conn(remote);
  Picker picker{mode, INT32_MAX, -1, {}};
  c.remote_have.for_each_set([&](PieceIndex p) {
    PieceStatus st = state.piece_status(p);
    if (st != PieceStatus::partial && st != PieceStatus::claimed) return;
    const PartialPiece* pp = state.partial(p);
    // needs at least one subpiece still missing
    if (pp && pp->received_count >= static_cast<int>(pp->received.size())) return;
    picker.offer(p, state.availability(p));
  });
  return picker.take(rng);
}

std::vector<SubpieceRef> next_subpiece_requests(const ConnectionState& conn,
                                                const PartialPiece* partial,
                                                const PieceLayout& layout,
                                                int pipeline_depth) {
  if (conn.peer_choking)
    throw std::logic_error("next_subpiece_requests called while choked");
  std::vector<SubpieceRef> reqs;
  if (!conn.current_piece) return reqs;
  int n = static_cast<int>(layout.subpiece_lengths.size());
  int room = pipeline_depth - static_cast<int>(conn.outstanding.size());
  if (room <= 0) return reqs;

  std::vector<bool> pending(n, false);
  for (const auto& o : conn.outstanding) {
    assert(o.piece == *conn.current_piece);
    Bytes off = 0;
    for (int s = 0; s < n; ++s) {
      if (off == o.offset) pending[s] = true;
      off += layout.subpiece_lengths[s];
    }
  }

  Bytes offset = 0;
  for (int s = 0; s < n && room > 0; ++s) {
    bool got = partial && partial->received[s];
    if (!got && !pending[s]) {
      reqs.push_back({*conn.current_piece, offset, layout.subpiece_lengths[s]});
      --room;
    }
    offset += layout.subpiece_lengths[s];
  }
  return reqs;
}

namespace {

std::vector<RatedPeer> sorted_by_rate(std::vector<RatedPeer> peers) {
  std::sort(peers.begin(), peers.end(), [](const RatedPeer& a, const RatedPeer& b) {
    if (a.rate != b.rate) return a.rate > b.rate;
    return a.id < b.id;
  });
  return peers;
}

}  // namespace

std::vector<PeerId> rechoke_leecher(const std::vector<RatedPeer>& interested,
                                    const ChokeConfig& cfg, long tick,
                                    PeerId& optimistic, Rng& rng) {
  auto sorted = sorted_by_rate(interested);
  std::vector<PeerId> unchoke;
  if (!cfg.optimistic_slot) {
    for (std::size_t i = 0; i < sorted.size() && i < static_cast<std::size_t>(cfg.upload_slots); ++i)
      unchoke.push_back(sorted[i].id);
    return unchoke;
  }

  std::size_t top_n = std::min(sorted.size(), static_cast<std::size_t>(cfg.upload_slots - 1));
  for (std::size_t i = 0; i < top_n; ++i) unchoke.push_back(sorted[i].id);

  std::vector<PeerId> pool;
  for (std::size_t i = top_n; i < sorted.size(); ++i) pool.push_back(sorted[i].id);
  if (pool.empty()) {
    optimistic = -1;
    return unchoke;
  }
  bool valid = std::find(pool.begin(), pool.end(), optimistic) != pool.end();
  if (tick % cfg.optimistic_rotation == 0 || !valid)
    optimistic = pool[rng.below(pool.size())];
  unchoke.push_back(optimistic);
  return unchoke;
}

std::vector<PeerId> rechoke_seed(const std::vector<RatedPeer>& interested,
                                 const ChokeConfig& cfg) {
  auto sorted = sorted_by_rate(interested);
  std::vector<PeerId> unchoke;
  for (std::size_t i = 0; i < sorted.size() && i < static_cast<std::size_t>(cfg.upload_slots); ++i)
    unchoke.push_back(sorted[i].id);
  return unchoke;
}

}  // namespace swarm
