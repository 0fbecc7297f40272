// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>

namespace danesd {

// Virtual clock: nanoseconds since scenario start. Record timestamps and
// certificate validity use whole seconds derived from this.
using VirtualTime = int64_t;

constexpr VirtualTime kNsPerUs = 1'000;
constexpr VirtualTime kNsPerMs = 1'000'000;
constexpr VirtualTime kNsPerSec = 1'000'000'000;

constexpr int64_t to_seconds(VirtualTime t) {
  return t / kNsPerSec;
}
constexpr double to_millis(VirtualTime t) {
  return static_cast<double>(t) / static_cast<double>(kNsPerMs);
}

} // namespace danesd
