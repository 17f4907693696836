#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lambda_lab/fields.hpp"

namespace lambda_lab::snapshot {

// LFLD binary layout (little-endian):
//   char[4] "LFLD" | u32 version = 1 | u32 n | u32 res[n] | f64 periods[n]
//   | u32 components | f64 data[nodes * components], node-major.
// Symmetric tensors list their components in sym_index order.

constexpr std::uint32_t kVersion = 1;

struct Snapshot {
  PeriodicGrid grid;
  int components = 0;
  std::vector<double> data;  // component-major, as in Field
};

void write(const std::filesystem::path& path, const PeriodicGrid& grid, int components,
           std::span<const double> component_major);

template <FieldKind K>
void write(const std::filesystem::path& path, const Field<K>& field) {
  write(path, field.grid(), field.component_count(), field.data());
}

/// Throws InvalidArgument on a malformed or truncated file.
Snapshot read(const std::filesystem::path& path);

ScalarField read_scalar(const std::filesystem::path& path);
SymTensorField read_tensor(const std::filesystem::path& path);
MetricField read_metric(const std::filesystem::path& path);

}  // namespace lambda_lab::snapshot
