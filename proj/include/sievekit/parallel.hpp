#pragma once

#include <cstddef>
#include <functional>

namespace sievekit {

/// Worker lanes from SIEVEKIT_THREADS (unset or invalid -> hardware concurrency, at least 1).
std::size_t default_lanes();

/// Run body(i) for i in [0, n) on `lanes` threads. Work is split into
/// contiguous blocks; callers write to slot i only, so results never depend
/// on the lane count. The first exception thrown by any lane is rethrown.
void parallel_for(std::size_t n, std::size_t lanes, const std::function<void(std::size_t)>& body);

}  // namespace sievekit
