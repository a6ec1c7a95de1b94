#pragma once

namespace phylat {

inline constexpr const char* kToolVersion = "phylat 0.1.0";

}  // namespace phylat
