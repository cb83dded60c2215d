#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hc3l/grid.hpp"

namespace hc3l {

// Named-grid container, 32-bit float payload on disk.
//
// Layout (little-endian throughout):
//   magic "HC3L" | u32 version=1 | u32 count |
//   per entry: u16 name length | UTF-8 name | u8 dtype (0 = f32) |
//              u8 rank | rank x u64 dims | row-major f32 payload
using GridMap = std::map<std::string, Grid>;

// Entries are written in the given order. Names must be unique and nonempty
// (std::invalid_argument otherwise).
void save_container(const std::string& path,
                    const std::vector<std::pair<std::string, Grid>>& entries);

// Throws FormatError (with byte offset) on malformed input and
// MissingInputError if the file cannot be opened.
GridMap load_container(const std::string& path);

}  // namespace hc3l
