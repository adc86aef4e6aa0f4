#pragma once

namespace barcodelm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace barcodelm
