#pragma once

namespace qmotor {

inline constexpr const char* version = "0.1.0";

}
