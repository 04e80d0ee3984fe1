#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace varbif::cli {

using Json = nlohmann::ordered_json;

/// `%.17g`, so every double round-trips.
std::string format_double(double v);

std::uint64_t fnv1a(std::string_view bytes);

/// Serializes with two-space indentation and 17-digit floats.
std::string dump_json(const Json& value);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Comma-separated file with a `# config_hash=..., version=...` first line.
class CsvWriter {
public:
    CsvWriter(std::vector<std::string> columns, const std::string& config_hash);
    void row(const std::vector<std::string>& cells);
    const std::string& text() const { return text_; }

private:
    std::size_t width_;
    std::string text_;
};

}  // namespace varbif::cli
