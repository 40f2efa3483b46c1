#pragma once

#include <string_view>

namespace specloop::embedded {

/// Reference runner script for the python-unittest profile.
std::string_view python_unittest_adapter();

}  // namespace specloop::embedded
