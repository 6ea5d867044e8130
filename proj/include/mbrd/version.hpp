#pragma once

namespace mbrd {

inline constexpr const char* kToolName = "mbrd";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace mbrd
