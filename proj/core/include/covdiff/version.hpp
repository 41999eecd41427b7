#pragma once

namespace covdiff {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace covdiff
