#pragma once

namespace ran {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace ran
