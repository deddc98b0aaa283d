#include "mvjump/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mvjump/errors.hpp"

namespace mvjump {

static_assert(std::endian::native == std::endian::little,
              "binary snapshots assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'V', 'J', 'S', 'N', 'A', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("truncated snapshot '" + path.string() + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_snapshot_csv(const std::filesystem::path& path, const Positions& x) {
  auto out = open_out(path, std::ios::out | std::ios::trunc);
  for (std::size_t j = 0; j < x.dim(); ++j) out << (j ? ",x" : "x") << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) {
    Point row = x.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << format_double(row[j]);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Positions read_snapshot_csv(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in);
  std::vector<double> data;
  std::size_t dim = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows == 0 && line_no == 1) continue;  // header
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": not a number");
    }
    if (dim == 0) dim = row.size();
    if (row.size() != dim) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(dim) + " columns");
    }
    data.insert(data.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw IoError("snapshot '" + path.string() + "' has no rows");
  return Positions(rows, dim, std::move(data));
}

void write_snapshot_binary(const std::filesystem::path& path, const Positions& x, double time) {
  auto out = open_out(path, std::ios::out | std::ios::trunc | std::ios::binary);
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, x.size());
  put<std::uint64_t>(out, x.dim());
  put<double>(out, time);
  out.write(reinterpret_cast<const char*>(x.data().data()),
            static_cast<std::streamsize>(x.data().size() * sizeof(double)));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Positions read_snapshot_binary(const std::filesystem::path& path, double* time) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IoError("'" + path.string() + "' is not a snapshot file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) throw IoError("unsupported snapshot version " + std::to_string(version));
  get<std::uint32_t>(in, path);
  const auto n = get<std::uint64_t>(in, path);
  const auto d = get<std::uint64_t>(in, path);
  const auto t = get<double>(in, path);
  if (time) *time = t;
  std::vector<double> data(n * d);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw IoError("truncated snapshot '" + path.string() + "'");
  return Positions(n, d, std::move(data));
}

}  // namespace mvjump
