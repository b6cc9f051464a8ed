#pragma once

#include <string_view>

namespace masersim {

inline constexpr std::string_view version = "0.1.0";

}  // namespace masersim
