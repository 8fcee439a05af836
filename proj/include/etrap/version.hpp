// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace etrap {

inline constexpr const char* version_string = "etrap 0.1.0";

}  // namespace etrap
