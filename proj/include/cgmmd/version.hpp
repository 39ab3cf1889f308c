#pragma once

namespace cgmmd {
inline constexpr const char* kVersion = "0.1.0";
}
