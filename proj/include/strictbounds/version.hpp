#pragma once

namespace strictbounds {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace strictbounds
