#pragma once

namespace saclab {

inline constexpr const char* kVersion = "0.1.0";

} // namespace saclab
