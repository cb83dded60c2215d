#include "hc3l/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include "hc3l/errors.hpp"

namespace hc3l {

namespace {

constexpr char kMagic[4] = {'H', 'C', '3', 'L'};
constexpr std::uint32_t kVersion = 1;

// Payloads are little-endian on disk; byte-swap on big-endian hosts.
constexpr bool host_little_endian() {
    return std::endian::native == std::endian::little;
}

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if (!host_little_endian()) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, std::size_t& offset, const char* what) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw FormatError(std::string("truncated container while reading ") + what, offset);
    if (!host_little_endian()) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    offset += sizeof(T);
    return value;
}

}  // namespace

void save_container(const std::string& path,
                    const std::vector<std::pair<std::string, Grid>>& entries) {
    std::set<std::string> seen;
    for (const auto& [name, grid] : entries) {
        if (name.empty()) throw std::invalid_argument("container entry name must be nonempty");
        if (name.size() > std::numeric_limits<std::uint16_t>::max())
            throw std::invalid_argument("container entry name too long: " + name);
        if (!seen.insert(name).second)
            throw std::invalid_argument("duplicate container entry name: " + name);
        (void)grid;
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MissingInputError("cannot open for writing: " + path);

    out.write(kMagic, 4);
    write_le<std::uint32_t>(out, kVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, grid] : entries) {
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<std::uint8_t>(out, 0);  // dtype f32
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(grid.rank()));
        for (std::size_t d : grid.shape()) write_le<std::uint64_t>(out, d);
        for (std::size_t i = 0; i < grid.size(); ++i)
            write_le<float>(out, static_cast<float>(grid[i]));
    }
    out.flush();
    if (!out) throw MissingInputError("write failed: " + path);
}

GridMap load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open container: " + path);

    std::size_t offset = 0;
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad magic, expected \"HC3L\"", 0);
    offset = 4;

    auto version = read_le<std::uint32_t>(in, offset, "version");
    if (version != kVersion)
        throw FormatError("unsupported container version " + std::to_string(version), 4);
    auto count = read_le<std::uint32_t>(in, offset, "entry count");

    GridMap result;
    for (std::uint32_t e = 0; e < count; ++e) {
        auto name_len = read_le<std::uint16_t>(in, offset, "name length");
        std::string name(name_len, '\0');
        std::size_t name_offset = offset;
        in.read(name.data(), name_len);
        if (!in) throw FormatError("truncated container while reading name", name_offset);
        offset += name_len;
        if (name.empty()) throw FormatError("empty entry name", name_offset);

        auto dtype = read_le<std::uint8_t>(in, offset, "dtype");
        if (dtype != 0)
            throw FormatError("unknown dtype " + std::to_string(dtype), offset - 1);
        auto rank = read_le<std::uint8_t>(in, offset, "rank");
        if (rank == 0) throw FormatError("rank must be >= 1", offset - 1);

        std::vector<std::size_t> shape(rank);
        std::size_t total = 1;
        for (std::uint8_t a = 0; a < rank; ++a) {
            auto d = read_le<std::uint64_t>(in, offset, "dimension");
            if (d == 0) throw FormatError("zero dimension", offset - 8);
            if (d > (std::uint64_t(1) << 40) || total > (std::size_t(1) << 40) / d)
                throw FormatError("implausible dimension size", offset - 8);
            shape[a] = static_cast<std::size_t>(d);
            total *= shape[a];
        }

        Grid grid(shape);
        for (std::size_t i = 0; i < total; ++i)
            grid[i] = static_cast<double>(read_le<float>(in, offset, "payload"));

        if (!result.emplace(name, std::move(grid)).second)
            throw FormatError("duplicate entry name: " + name, name_offset);
    }

    // The format is self-delimiting; anything after the last entry is junk.
    in.peek();
    if (!in.eof()) throw FormatError("trailing bytes after last entry", offset);
    return result;
}

}  // namespace hc3l
