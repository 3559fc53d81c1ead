#pragma once

namespace okin {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace okin
