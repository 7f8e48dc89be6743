#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace limda::io {

/// CRC-64/XZ of a byte string; used for file checksums and content-addressed cache keys.
std::uint64_t crc64(std::string_view bytes);
std::uint64_t crc64(std::span<const double> values);
std::string hex64(std::uint64_t value);

/// Little-endian float64 blocks, independent of host byte order.
void write_f64_le(std::ostream& out, std::span<const double> values);
void read_f64_le(std::istream& in, std::span<double> values);
std::string encode_f64_le(std::span<const double> values);
std::string encode_u64_le(std::span<const std::uint64_t> values);
void decode_u64_le(std::string_view bytes, std::span<std::uint64_t> values);

/// Writes to `path`.tmp and renames over `path` so readers never see a partial file.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Seed derivation for independent per-item RNG streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

std::string utc_timestamp();

}  // namespace limda::io
