#pragma once

#include <vector>

#include "swarm/core.hpp"

namespace swarm {

struct PieceLayout {
  PieceIndex index = 0;
  Bytes length = 0;
  std::vector<Bytes> subpiece_lengths;
};

// Content geometry: pieces, subpieces and the metainfo-file model. Pure
// arithmetic, no state.
class TorrentSpec {
 public:
  TorrentSpec() = default;
  TorrentSpec(Bytes content_size, Bytes piece_size, Bytes subpiece_size,
              Bytes metainfo_fixed_overhead = 400);

  Bytes content_size() const { return content_size_; }
  Bytes piece_size() const { return piece_size_; }
  Bytes subpiece_size() const { return subpiece_size_; }
  Bytes metainfo_fixed_overhead() const { return metainfo_fixed_overhead_; }

  PieceIndex piece_count() const { return piece_count_; }

  // Length of piece i; only the last piece may be short.
  Bytes piece_length(PieceIndex i) const;

  int subpiece_count(PieceIndex i) const;

  // Length of subpiece `sub` of piece i; only the last may be short.
  Bytes subpiece_length(PieceIndex i, int sub) const;

  // Byte offset of subpiece `sub` within piece i.
  Bytes subpiece_offset(int sub) const { return static_cast<Bytes>(sub) * subpiece_size_; }

  PieceLayout subpiece_layout(PieceIndex i) const;

  // Fixed overhead plus one 20-byte hash per piece.
  Bytes metainfo_size() const { return metainfo_fixed_overhead_ + 20 * static_cast<Bytes>(piece_count_); }

 private:
  Bytes content_size_ = 0;
  Bytes piece_size_ = 0;
  Bytes subpiece_size_ = 0;
  Bytes metainfo_fixed_overhead_ = 400;
  PieceIndex piece_count_ = 0;
};

enum class MsgKind : std::uint8_t {
  handshake,
  keepalive,
  choke,
  unchoke,
  interested,
  not_interested,
  have,
  bitfield,
  request,
  piece_data,
};

const char* msg_kind_name(MsgKind k);

// Typed protocol message. `length` is the request length or the piece_data
// payload length; other kinds leave the numeric fields unused.
struct WireMessage {
  MsgKind kind = MsgKind::keepalive;
  PieceIndex piece = -1;
  Bytes offset = 0;
  Bytes length = 0;

  static WireMessage make_have(PieceIndex p) { return {MsgKind::have, p, 0, 0}; }
  static WireMessage make_request(PieceIndex p, Bytes off, Bytes len) {
    return {MsgKind::request, p, off, len};
  }
  static WireMessage make_piece(PieceIndex p, Bytes off, Bytes len) {
    return {MsgKind::piece_data, p, off, len};
  }
  static WireMessage make(MsgKind k) { return {k, -1, 0, 0}; }
};

// Exact peer-wire byte size: 4-byte length prefix + 1-byte id + fixed fields.
// The bitfield size is 5 + ceil(piece_count / 8).
Bytes message_wire_size(MsgKind kind, const TorrentSpec& spec, Bytes payload_length = 0);

inline Bytes message_wire_size(const WireMessage& m, const TorrentSpec& spec) {
  return message_wire_size(m.kind, spec, m.length);
}

}  // namespace swarm
