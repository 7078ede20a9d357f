#include "blco/tensor_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace blco {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

index_t parse_coord(std::string_view tok, std::size_t lineno) {
  index_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw FormatError("tns: non-numeric coordinate '" + std::string(tok) + "' on line " +
                      std::to_string(lineno));
  if (v < 1)
    throw FormatError("tns: coordinate < 1 on line " + std::to_string(lineno));
  return v;
}

double parse_value(std::string_view tok, std::size_t lineno) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw FormatError("tns: non-numeric value '" + std::string(tok) + "' on line " +
                      std::to_string(lineno));
  return v;
}

}  // namespace

SparseTensorCoo load_tns(std::istream& in, std::optional<std::vector<index_t>> dims_override) {
  std::string line;
  std::size_t lineno = 0;
  int order = -1;
  std::vector<std::vector<index_t>> indices;
  std::vector<double> values;

  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (order < 0) {
      if (toks.size() < 2)
        throw FormatError("tns: first data line needs at least one coordinate and a value");
      order = static_cast<int>(toks.size()) - 1;
      indices.assign(order, {});
    }
    if (toks.size() != static_cast<std::size_t>(order) + 1)
      throw FormatError("tns: line " + std::to_string(lineno) + " has " +
                        std::to_string(toks.size()) + " columns, expected " +
                        std::to_string(order + 1));
    for (int m = 0; m < order; ++m) indices[m].push_back(parse_coord(toks[m], lineno) - 1);
    values.push_back(parse_value(toks.back(), lineno));
  }
  if (order < 0) throw FormatError("tns: no data lines");

  std::vector<index_t> dims;
  if (dims_override) {
    dims = std::move(*dims_override);
    if (static_cast<int>(dims.size()) != order)
      throw FormatError("tns: dims override has " + std::to_string(dims.size()) +
                        " modes, data has " + std::to_string(order));
    for (int m = 0; m < order; ++m)
      for (index_t i : indices[m])
        if (i >= dims[m])
          throw FormatError("tns: coordinate " + std::to_string(i + 1) + " exceeds mode " +
                            std::to_string(m + 1) + " override length " + std::to_string(dims[m]));
  }
  return SparseTensorCoo::from_arrays(std::move(dims), std::move(indices), std::move(values));
}

SparseTensorCoo load_tns_file(const std::filesystem::path& path,
                              std::optional<std::vector<index_t>> dims_override) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return load_tns(in, std::move(dims_override));
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

void write_tns(const SparseTensorCoo& t, std::ostream& out) {
  for (std::size_t e = 0; e < t.nnz(); ++e) {
    for (int m = 0; m < t.order(); ++m) out << (t.indices[m][e] + 1) << ' ';
    out << format_double(t.values[e]) << '\n';
  }
}

void write_tns_file(const SparseTensorCoo& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_tns(t, out);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace blco
