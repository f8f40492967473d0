#pragma once

namespace ntkreg {

inline constexpr const char* kVersion = "0.1.0";

}
