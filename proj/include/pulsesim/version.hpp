#pragma once

namespace pulsesim {

inline constexpr const char* kToolVersion = "1.0.0";

} // namespace pulsesim
