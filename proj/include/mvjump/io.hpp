#pragma once

// Snapshot files and number formatting shared by the CLI and the library.
//
// Binary snapshot layout (little-endian):
//   char[8]  "MVJSNAP\0"
//   uint32   version (1)
//   uint32   reserved (0)
//   uint64   N
//   uint64   d
//   float64  time
//   float64  N*d values, row-major

#include <filesystem>
#include <string>

#include "mvjump/types.hpp"

namespace mvjump {

/// Shortest text that round-trips: "%.17g".
std::string format_double(double v);

void write_snapshot_csv(const std::filesystem::path& path, const Positions& x);
/// Accepts an optional header line; every other line must hold d numbers.
Positions read_snapshot_csv(const std::filesystem::path& path);

void write_snapshot_binary(const std::filesystem::path& path, const Positions& x, double time);
Positions read_snapshot_binary(const std::filesystem::path& path, double* time = nullptr);

}  // namespace mvjump
