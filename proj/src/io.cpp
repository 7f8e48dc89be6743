#include "limda/io.hpp"

#include "limda/errors.hpp"

#include <boost/crc.hpp>

#include <bit>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace limda::io {

namespace {

using Crc64 = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, 0xFFFFFFFFFFFFFFFFULL, 0xFFFFFFFFFFFFFFFFULL, true, true>;

std::uint64_t to_le(std::uint64_t bits) {
    if constexpr (std::endian::native == std::endian::little) {
        return bits;
    } else {
        std::uint64_t out = 0;
        for (int b = 0; b < 8; ++b) out |= ((bits >> (8 * b)) & 0xFF) << (8 * (7 - b));
        return out;
    }
}

}  // namespace

std::uint64_t crc64(std::string_view bytes) {
    Crc64 crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

std::uint64_t crc64(std::span<const double> values) { return crc64(encode_f64_le(values)); }

std::string hex64(std::uint64_t value) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << value;
    return os.str();
}

std::string encode_f64_le(std::span<const double> values) {
    std::string bytes(values.size() * 8, '\0');
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(values[i]));
        std::memcpy(bytes.data() + 8 * i, &bits, 8);
    }
    return bytes;
}

std::string encode_u64_le(std::span<const std::uint64_t> values) {
    std::string bytes(values.size() * 8, '\0');
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint64_t bits = to_le(values[i]);
        std::memcpy(bytes.data() + 8 * i, &bits, 8);
    }
    return bytes;
}

void decode_u64_le(std::string_view bytes, std::span<std::uint64_t> values) {
    if (bytes.size() != values.size() * 8) throw CorruptData("uint64 block has the wrong size");
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, bytes.data() + 8 * i, 8);
        values[i] = to_le(bits);
    }
}

void write_f64_le(std::ostream& out, std::span<const double> values) {
    const std::string bytes = encode_f64_le(values);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void read_f64_le(std::istream& in, std::span<double> values) {
    std::string bytes(values.size() * 8, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw CorruptData("unexpected end of float64 block");
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, bytes.data() + 8 * i, 8);
        values[i] = std::bit_cast<double>(to_le(bits));
    }
}

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    // splitmix64 over the combined key
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace limda::io
