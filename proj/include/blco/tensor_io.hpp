#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "blco/types.hpp"

namespace blco {

// Parses FROSTT `.tns` text: each non-comment line holds N whitespace-
// separated 1-based coordinates followed by one value; '#' starts a comment
// line; N is inferred from the first data line. Indices come out 0-based,
// duplicates are summed, dims default to the observed per-mode maxima unless
// an override is supplied (which must cover every coordinate).
SparseTensorCoo load_tns(std::istream& in,
                         std::optional<std::vector<index_t>> dims_override = std::nullopt);
SparseTensorCoo load_tns_file(const std::filesystem::path& path,
                              std::optional<std::vector<index_t>> dims_override = std::nullopt);

// Emits 1-based indices, space separated, value last, '\n' line endings.
// Values are printed in shortest round-trip form.
void write_tns(const SparseTensorCoo& t, std::ostream& out);
void write_tns_file(const SparseTensorCoo& t, const std::filesystem::path& path);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace blco
