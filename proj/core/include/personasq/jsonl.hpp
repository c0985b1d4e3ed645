#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace personasq {

using Json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never observe a
/// truncated file at `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::vector<Json> read_jsonl(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<Json>& rows);

/// Compact single-line dump; UTF-8 passes through unescaped.
std::string dump_compact(const Json& value);

}  // namespace personasq
