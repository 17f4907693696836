#include "lambda_lab/snapshot.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "lambda_lab/error.hpp"

namespace lambda_lab::snapshot {

static_assert(std::endian::native == std::endian::little, "LFLD I/O assumes a little-endian host");

namespace {

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw InvalidArgument("truncated LFLD file: " + path.string());
  return v;
}

}  // namespace

void write(const std::filesystem::path& path, const PeriodicGrid& grid, int components,
           std::span<const double> component_major) {
  const std::size_t N = grid.node_count();
  if (component_major.size() != N * static_cast<std::size_t>(components))
    throw InvalidArgument("snapshot data size does not match grid and component count");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot open for writing: " + path.string());
  os.write("LFLD", 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.dim()));
  for (int a = 0; a < grid.dim(); ++a) put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.res(a)));
  for (int a = 0; a < grid.dim(); ++a) put<double>(os, grid.period(a));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(components));
  std::vector<double> node_major(component_major.size());
  for (int c = 0; c < components; ++c)
    for (std::size_t k = 0; k < N; ++k) node_major[k * components + c] = component_major[c * N + k];
  os.write(reinterpret_cast<const char*>(node_major.data()),
           static_cast<std::streamsize>(node_major.size() * sizeof(double)));
  if (!os) throw InvalidArgument("write failed: " + path.string());
}

Snapshot read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open snapshot: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "LFLD", 4) != 0)
    throw InvalidArgument("not an LFLD file: " + path.string());
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion) throw InvalidArgument("unsupported LFLD version " + std::to_string(version));
  const auto n = get<std::uint32_t>(is, path);
  if (n != 2 && n != 3) throw InvalidArgument("LFLD dimension must be 2 or 3");
  std::vector<int> res(n);
  std::vector<double> periods(n);
  for (auto& r : res) r = static_cast<int>(get<std::uint32_t>(is, path));
  for (auto& p : periods) p = get<double>(is, path);
  Snapshot s{PeriodicGrid(res, periods), 0, {}};
  s.components = static_cast<int>(get<std::uint32_t>(is, path));
  const std::size_t N = s.grid.node_count();
  std::vector<double> node_major(N * s.components);
  if (!is.read(reinterpret_cast<char*>(node_major.data()),
               static_cast<std::streamsize>(node_major.size() * sizeof(double))))
    throw InvalidArgument("truncated LFLD payload: " + path.string());
  s.data.resize(node_major.size());
  for (int c = 0; c < s.components; ++c)
    for (std::size_t k = 0; k < N; ++k) s.data[c * N + k] = node_major[k * s.components + c];
  return s;
}

ScalarField read_scalar(const std::filesystem::path& path) {
  Snapshot s = read(path);
  if (s.components != 1) throw InvalidArgument("expected a scalar snapshot: " + path.string());
  return ScalarField(s.grid, std::move(s.data));
}

SymTensorField read_tensor(const std::filesystem::path& path) {
  Snapshot s = read(path);
  if (s.components != sym_count(s.grid.dim()))
    throw InvalidArgument("expected a symmetric tensor snapshot: " + path.string());
  return SymTensorField(s.grid, std::move(s.data));
}

MetricField read_metric(const std::filesystem::path& path) { return MetricField(read_tensor(path)); }

}  // namespace lambda_lab::snapshot
