#pragma once

namespace sfnn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sfnn
