#include "cgame/io.hpp"

#include "cgame/error.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>

namespace cgame::io {

namespace fs = std::filesystem;

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xf]);
    }
    return out;
}

void append_f32le(std::vector<std::uint8_t>& out, std::span<const double> values) {
    out.reserve(out.size() + values.size() * 4);
    for (double v : values) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
}

std::vector<double> read_f32le(std::span<const std::uint8_t> bytes, std::size_t& offset, std::size_t count) {
    if (offset > bytes.size() || (bytes.size() - offset) / 4 < count) {
        throw ShapeError("blob too short: need " + std::to_string(count) + " floats at byte " + std::to_string(offset) +
                         ", blob has " + std::to_string(bytes.size()) + " bytes");
    }
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[offset + 4 * i + b]) << (8 * b);
        out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    offset += 4 * count;
    return out;
}

void round_to_f32(std::span<double> values) noexcept {
    for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path.string());
}

void write_text(const fs::path& path, std::string_view text) {
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

nlohmann::json read_json(const fs::path& path) {
    const auto bytes = read_file(path);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_directory_atomically(const fs::path& dir, const std::function<void(const fs::path&)>& fill) {
    const fs::path target = fs::absolute(dir);
    const fs::path parent = target.parent_path();
    fs::create_directories(parent);

    std::random_device rd;
    const fs::path tmp = parent / ("." + target.filename().string() + ".tmp-" + std::to_string(rd()));
    fs::remove_all(tmp);
    fs::create_directory(tmp);
    try {
        fill(tmp);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(tmp, ec);
        throw;
    }
    std::error_code ec;
    if (fs::exists(target)) {
        const fs::path old = parent / ("." + target.filename().string() + ".old-" + std::to_string(rd()));
        fs::rename(target, old);
        fs::rename(tmp, target);
        fs::remove_all(old, ec);
    } else {
        fs::rename(tmp, target);
    }
}

StrictObject::StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("expected a JSON object", path_.empty() ? "<root>" : path_);
}

std::string StrictObject::field(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
}

void StrictObject::allow_only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [key, _] : j_.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown field", field(key));
    }
}

bool StrictObject::has(std::string_view key) const { return j_.contains(std::string(key)); }

const nlohmann::json& StrictObject::at(std::string_view key) const {
    auto it = j_.find(std::string(key));
    if (it == j_.end()) throw ConfigError("missing field", field(key));
    return *it;
}

template <typename T>
void StrictObject::read(std::string_view key, T& out) const {
    if (!has(key)) return;
    const auto& v = at(key);
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError("expected a boolean", field(key));
        } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
            if (!v.is_number_integer()) throw ConfigError("expected an integer", field(key));
            if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
                throw ConfigError("expected a non-negative integer", field(key));
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError("expected an integer", field(key));
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError("expected a number", field(key));
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError("expected a string", field(key));
        }
        out = v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid value: ") + e.what(), field(key));
    }
}

template void StrictObject::read<bool>(std::string_view, bool&) const;
template void StrictObject::read<double>(std::string_view, double&) const;
template void StrictObject::read<std::size_t>(std::string_view, std::size_t&) const;
template void StrictObject::read<std::uint32_t>(std::string_view, std::uint32_t&) const;
template void StrictObject::read<std::int64_t>(std::string_view, std::int64_t&) const;
template void StrictObject::read<std::string>(std::string_view, std::string&) const;
template void StrictObject::read<std::vector<std::uint64_t>>(std::string_view, std::vector<std::uint64_t>&) const;

} // namespace cgame::io
