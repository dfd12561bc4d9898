#pragma once

#include <map>
#include <optional>
#include <vector>

#include "swarm/bitfield.hpp"
#include "swarm/content.hpp"
#include "swarm/core.hpp"

namespace swarm {

enum class Role : std::uint8_t { leecher, seed };
enum class OrderMode : std::uint8_t { deterministic, random };

struct ChokeConfig {
  int upload_slots = 4;
  double rechoke_period = 10.0;
  bool optimistic_slot = true;
  int optimistic_rotation = 3;
};

struct SubpieceRef {
  PieceIndex piece = -1;
  Bytes offset = 0;
  Bytes length = 0;

  bool operator==(const SubpieceRef&) const = default;
};

// One directed neighbour relationship as seen from the local peer.
struct ConnectionState {
  PeerId remote = -1;
  bool open = false;
  bool am_choking = true;
  bool am_interested = false;
  bool peer_choking = true;
  bool peer_interested = false;

  Bitfield remote_have;
  int wanted_count = 0;  // pieces the remote has and we lack

  std::optional<PieceIndex> current_piece;
  std::vector<SubpieceRef> outstanding;  // all target current_piece, <= pipeline depth
  bool endgame_claim = false;            // current_piece duplicated across connections

  // Rolling rate estimate: average of the last two rechoke-period buckets,
  // i.e. a 20 s window at the default period. Payload bytes only.
  double bytes_from_cur = 0, bytes_from_prev = 0;
  double bytes_to_cur = 0, bytes_to_prev = 0;
  double rate_from_remote = 0;  // bytes/s, remote -> us
  double rate_to_remote = 0;    // bytes/s, us -> remote

  // Send-side activity history for the TCP ramp model.
  double tcp_active_run = 0;
  double tcp_last_end = -1e18;

  // When we last choked this peer. Requests that left the remote before it
  // could have seen that choke (one round trip) are stale and must not be
  // granted, or the remote would receive data it already wrote off.
  double last_choke_sent = -1e18;
};

enum class PieceStatus : std::uint8_t { missing, partial, claimed, held };

struct PartialPiece {
  int received_count = 0;
  std::vector<bool> received;  // per subpiece
};

struct Emission {
  PeerId to = -1;
  WireMessage msg;
};

// Cross-connection request revocation (endgame cancel-on-receipt).
struct Revocation {
  PeerId sender = -1;
  SubpieceRef sub;
};

struct HandleResult {
  std::vector<Emission> send;
  std::vector<Revocation> revoke;
  std::optional<PieceIndex> completed_piece;
  bool finished = false;  // bitfield just became all-ones
};

class PeerState {
 public:
  PeerState() = default;
  PeerState(PeerId id, Role role, const TorrentSpec& spec, double upload_capacity);

  PeerId id() const { return id_; }
  Role role() const { return role_; }
  bool connected() const { return connected_; }
  void set_disconnected() { connected_ = false; }
  double upload_capacity() const { return upload_capacity_; }
  const Bitfield& have() const { return have_; }
  bool complete() const { return have_.all(); }

  const std::map<PeerId, ConnectionState>& connections() const { return conns_; }
  std::map<PeerId, ConnectionState>& connections() { return conns_; }
  ConnectionState& conn(PeerId remote) { return conns_.at(remote); }
  const ConnectionState& conn(PeerId remote) const { return conns_.at(remote); }
  bool has_connection(PeerId remote) const { return conns_.count(remote) != 0; }

  void add_connection(PeerId remote);
  // Tears down the local half of a connection: releases the claim, clears
  // outstanding requests, and removes the remote's pieces from availability.
  void close_connection(PeerId remote);

  int availability(PieceIndex p) const { return availability_[p]; }
  PieceStatus piece_status(PieceIndex p) const { return piece_status_[p]; }
  const std::map<PieceIndex, PartialPiece>& partials() const { return partials_; }

  int unchoked_count() const;

  // Message handling; emits reply messages and reports piece/content
  // completion. `request` and data-plane effects are the engine's business.
  HandleResult handle_message(PeerId from, const WireMessage& msg, bool endgame);

  // Bitfields carry content the compact WireMessage cannot, so they arrive
  // through their own entry point.
  HandleResult handle_bitfield(PeerId from, const Bitfield& bits);

  // Claim bookkeeping for piece selection.
  void begin_piece(PeerId remote, PieceIndex p, bool endgame_claim);
  void release_piece(PeerId remote);

  const PartialPiece* partial(PieceIndex p) const;
  PartialPiece& partial_for(PieceIndex p, int subpiece_count);

  // True when some other connection currently claims p (endgame eligibility).
  bool claimed_elsewhere(PieceIndex p, PeerId remote) const;

  long next_rechoke_tick() { return rechoke_tick_++; }
  PeerId optimistic_peer = -1;

  // Test support: recomputes availability from the raw remote bitfields.
  std::vector<int> recount_availability() const;

 private:
  void apply_remote_bitfield(ConnectionState& c, const Bitfield& bits, HandleResult& out);
  void apply_remote_have(ConnectionState& c, PieceIndex p, HandleResult& out);
  void record_subpiece(ConnectionState& c, const WireMessage& msg, bool endgame,
                       HandleResult& out);
  void update_interest(ConnectionState& c, HandleResult& out);

  PeerId id_ = -1;
  Role role_ = Role::leecher;
  TorrentSpec spec_;
  double upload_capacity_ = 0;
  bool connected_ = true;
  Bitfield have_;
  std::vector<int> availability_;
  std::vector<PieceStatus> piece_status_;
  std::map<PieceIndex, PartialPiece> partials_;
  std::map<PeerId, ConnectionState> conns_;
  long rechoke_tick_ = 0;
};

// Rarest-first selection among pieces the remote has, we lack, and no other
// connection claims. Partially downloaded pieces take strict priority.
// Deterministic mode breaks availability ties by lowest index; random mode
// uniformly via the rng (one draw per selection).
std::optional<PieceIndex> select_next_piece(const PeerState& state, PeerId remote,
                                            OrderMode mode, Rng& rng);

// Endgame variant: permits adopting a piece already claimed by another
// connection, never re-requesting subpieces this connection already covers.
std::optional<PieceIndex> select_endgame_piece(const PeerState& state, PeerId remote,
                                               OrderMode mode, Rng& rng);

// Tops outstanding requests up to min(pipeline_depth, subpieces left in the
// current piece), in offset order, never crossing the piece boundary.
// Throws if called while choked by the remote.
std::vector<SubpieceRef> next_subpiece_requests(const ConnectionState& conn,
                                                const PartialPiece* partial,
                                                const PieceLayout& layout,
                                                int pipeline_depth);

struct RatedPeer {
  PeerId id = -1;
  double rate = 0;
};

// Leecher unchoke policy: (slots - 1) fastest interested peers by download
// rate plus one sticky optimistic peer redrawn every `optimistic_rotation`
// ticks. Ties break by lower peer id. `optimistic` carries the sticky choice
// across ticks (-1 = none).
std::vector<PeerId> rechoke_leecher(const std::vector<RatedPeer>& interested,
                                    const ChokeConfig& cfg, long tick,
                                    PeerId& optimistic, Rng& rng);

// Seed unchoke policy: top slots by upload rate to the remote, no optimistic
// slot, ties by lower peer id.
std::vector<PeerId> rechoke_seed(const std::vector<RatedPeer>& interested,
                                 const ChokeConfig& cfg);

}  // namespace swarm
