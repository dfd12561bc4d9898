#pragma once

#include <string>

#include "swarm/metrics.hpp"

namespace swarm {

// Canonical JSON rendering of a run's metrics: keys sorted, fixed field set.
// Two identical runs must serialize to identical bytes.
std::string bundle_to_json(const MetricsBundle& bundle);

}  // namespace swarm
