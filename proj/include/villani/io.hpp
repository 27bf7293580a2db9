#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace villani {

/// Shortest round-trippable decimal form ('.' separator, locale independent).
std::string format_number(double x);

void write_text_file(const std::filesystem::path& path, std::string_view contents);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace villani
