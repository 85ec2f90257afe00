#pragma once

#include <string>
#include <string_view>

namespace gridflow {

std::string xml_escape(std::string_view text);

}  // namespace gridflow
