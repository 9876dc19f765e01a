#pragma once

namespace mirage {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mirage
