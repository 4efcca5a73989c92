#pragma once

namespace gomkit {

inline constexpr const char* kVersion = "0.1.0";

} // namespace gomkit
