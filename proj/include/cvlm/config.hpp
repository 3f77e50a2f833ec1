#pragma once

#include <string>
#include <utility>
#include <vector>

namespace cvlm {

/// Parses `key=value` lines; blank lines and lines starting with '#' are skipped.
/// Keys and values are trimmed. Order is preserved.
std::vector<std::pair<std::string, std::string>> parse_key_value_config(const std::string& text);

}  // namespace cvlm
