#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ethlab {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace ethlab
