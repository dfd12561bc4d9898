#include "swarm/serialize.hpp"

#include <json.hpp>

namespace swarm {

using nlohmann::json;

std::string bundle_to_json(const MetricsBundle& b) {
  json j;
  j["leecher_count"] = b.leecher_count;
  j["content_size"] = b.content_size;
  j["piece_size"] = b.piece_size;
  j["subpiece_size"] = b.subpiece_size;
  j["completion_times"] = b.completion_times;
  j["leecher_capacities"] = b.leecher_capacities;
  j["window_upload_bytes"] = b.window_upload_bytes;

  json log = json::array();
  for (const auto& e : b.seed_piece_log)
    log.push_back({{"t", e.time}, {"piece", e.piece}, {"first", e.was_first_copy}});
  j["seed_piece_log"] = log;
  j["seed_duplicate_subpiece_bytes"] = b.seed_duplicate_subpiece_bytes;

  json traffic = json::array();
  for (const auto& t : b.traffic)
    traffic.push_back({{"bitfield", t.bitfield_bytes},
                       {"have", t.have_bytes},
                       {"other_control", t.other_control_bytes},
                       {"data_payload", t.data_payload_bytes},
                       {"data_header", t.data_header_bytes},
                       {"data_received", t.data_received_bytes}});
  j["traffic"] = traffic;

  j["dropped_deliveries"] = b.dropped_deliveries;
  j["ignored_requests"] = b.ignored_requests;
  j["max_outstanding"] = b.max_outstanding;
  j["fresh_selections"] = b.fresh_selections;
  j["events_processed"] = b.events_processed;
  j["end_time"] = b.end_time;
  return j.dump();
}

}  // namespace swarm
