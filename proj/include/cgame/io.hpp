#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cgame::io {

/// Lower-case hex SHA-256 of `bytes`.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// Appends values as 32-bit little-endian IEEE-754 floats.
void append_f32le(std::vector<std::uint8_t>& out, std::span<const double> values);
/// Decodes `count` floats starting at byte `offset`; advances `offset`.
std::vector<double> read_f32le(std::span<const std::uint8_t> bytes, std::size_t& offset, std::size_t count);

/// Rounds every value to the nearest float, i.e. the persisted precision.
void round_to_f32(std::span<double> values) noexcept;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
nlohmann::json read_json(const std::filesystem::path& path);

/// Fills a fresh sibling temp directory via `fill`, then renames it onto `dir`.
/// A failure in `fill` leaves `dir` untouched.
void write_directory_atomically(const std::filesystem::path& dir,
                                const std::function<void(const std::filesystem::path&)>& fill);

/// Field-path aware accessors for strict JSON config/manifest parsing.
class StrictObject {
public:
    StrictObject(const nlohmann::json& j, std::string path);

    /// Rejects keys outside `allowed` with a ConfigError naming the full field path.
    void allow_only(std::initializer_list<std::string_view> allowed) const;
    bool has(std::string_view key) const;
    const nlohmann::json& at(std::string_view key) const;
    std::string field(std::string_view key) const;

    template <typename T>
    void read(std::string_view key, T& out) const;

private:
    const nlohmann::json& j_;
    std::string path_;
};

} // namespace cgame::io
