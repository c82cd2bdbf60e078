#pragma once

namespace noiselab {

inline constexpr const char* kVersion = "0.1.0";

} // namespace noiselab
