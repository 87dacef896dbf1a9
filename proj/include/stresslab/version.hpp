#pragma once

namespace stresslab {

inline constexpr const char* kToolName = "stresslab";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace stresslab
