#pragma once

namespace bpsim {

inline constexpr const char* kVersion = "0.1.0";

} // namespace bpsim
