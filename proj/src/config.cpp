#include "cvlm/config.hpp"

#include <sstream>

#include "cvlm/error.hpp"

namespace cvlm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_value_config(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::move(key), trim(t.substr(eq + 1)));
    }
    return out;
}

}  // namespace cvlm
