#pragma once

namespace ultraconv {
inline constexpr const char* kVersion = "0.1.0";
}
