#pragma once

namespace kgc {
inline constexpr const char* kToolkitVersion = "0.1.0";
}
