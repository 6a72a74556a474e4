#pragma once

namespace wham {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wham
