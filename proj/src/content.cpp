#include "swarm/content.hpp"

#include <stdexcept>
#include <string>

namespace swarm {

TorrentSpec::TorrentSpec(Bytes content_size, Bytes piece_size, Bytes subpiece_size,
                         Bytes metainfo_fixed_overhead)
    : content_size_(content_size),
      piece_size_(piece_size),
      subpiece_size_(subpiece_size),
      metainfo_fixed_overhead_(metainfo_fixed_overhead) {
  if (content_size < 1) throw std::invalid_argument("content_size must be >= 1");
  if (subpiece_size < 1) throw std::invalid_argument("subpiece_size must be >= 1");
  if (subpiece_size > piece_size)
    throw std::invalid_argument("subpiece_size " + std::to_string(subpiece_size) +
                                " exceeds piece_size " + std::to_string(piece_size));
  if (metainfo_fixed_overhead < 0)
    throw std::invalid_argument("metainfo_fixed_overhead must be >= 0");
  piece_count_ = static_cast<PieceIndex>((content_size + piece_size - 1) / piece_size);
}

Bytes TorrentSpec::piece_length(PieceIndex i) const {
  if (i < 0 || i >= piece_count_)
    throw std::out_of_range("piece index " + std::to_string(i) + " out of range");
  if (i + 1 < piece_count_) return piece_size_;
  return content_size_ - static_cast<Bytes>(piece_count_ - 1) * piece_size_;
}

int TorrentSpec::subpiece_count(PieceIndex i) const {
  Bytes len = piece_length(i);
  return static_cast<int>((len + subpiece_size_ - 1) / subpiece_size_);
}

Bytes TorrentSpec::subpiece_length(PieceIndex i, int sub) const {
  Bytes len = piece_length(i);
  int n = static_cast<int>((len + subpiece_size_ - 1) / subpiece_size_);
  if (sub < 0 || sub >= n)
    throw std::out_of_range("subpiece index " + std::to_string(sub) + " out of range");
  if (sub + 1 < n) return subpiece_size_;
  return len - static_cast<Bytes>(n - 1) * subpiece_size_;
}

PieceLayout TorrentSpec::subpiece_layout(PieceIndex i) const {
  PieceLayout layout;
  layout.index = i;
  layout.length = piece_length(i);
  int n = subpiece_count(i);
  layout.subpiece_lengths.reserve(n);
  for (int s = 0; s < n; ++s) layout.subpiece_lengths.push_back(subpiece_length(i, s));
  return layout;
}

const char* msg_kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::handshake: return "handshake";
    case MsgKind::keepalive: return "keepalive";
    case MsgKind::choke: return "choke";
    case MsgKind::unchoke: return "unchoke";
    case MsgKind::interested: return "interested";
    case MsgKind::not_interested: return "not_interested";
    case MsgKind::have: return "have";
    case MsgKind::bitfield: return "bitfield";
    case MsgKind::request: return "request";
    case MsgKind::piece_data: return "piece_data";
  }
  return "?";
}

Bytes message_wire_size(MsgKind kind, const TorrentSpec& spec, Bytes payload_length) {
  switch (kind) {
    case MsgKind::handshake: return 68;
    case MsgKind::keepalive: return 4;
    case MsgKind::choke:
    case MsgKind::unchoke:
    case MsgKind::interested:
    case MsgKind::not_interested: return 5;
    case MsgKind::have: return 9;
    case MsgKind::request: return 17;
    case MsgKind::bitfield: return 5 + (static_cast<Bytes>(spec.piece_count()) + 7) / 8;
    case MsgKind::piece_data: return 13 + payload_length;
  }
  return 0;
}

}  // namespace swarm
