#pragma once

namespace propsel {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace propsel
