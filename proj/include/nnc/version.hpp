#pragma once

namespace nnc {

inline constexpr const char* kVersion = "0.3.0";

}  // namespace nnc
