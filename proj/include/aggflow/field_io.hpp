#pragma once

#include "aggflow/spectral.hpp"

#include <filesystem>
#include <vector>

namespace aggflow {

/// Plain-text field table:
///
///     # aggflow field table v1
///     dim <d>
///     n <n>
///     components <c>
///     <value>            one per line, component 0 first, nodes in row-major order
///
/// Values are written as shortest round-trip decimals, so a save/load cycle is exact.
void write_field_table(const std::filesystem::path& path, const std::vector<Field>& components);
std::vector<Field> read_field_table(const std::filesystem::path& path);

}  // namespace aggflow
