#pragma once

// Version stamp recorded in sweep manifests so an artifact can be traced to
// the code that produced it.

namespace kpo {

inline constexpr const char* kVersionString = "0.1.0";

}  // namespace kpo
