#pragma once

#include <filesystem>
#include <string_view>

namespace cwseg::io {

/// Writes to a sibling temporary file, then renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace cwseg::io
