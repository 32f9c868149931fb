#include "aggflow/field_io.hpp"

#include "aggflow/format.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace aggflow {

void write_field_table(const std::filesystem::path& path, const std::vector<Field>& components) {
  if (components.empty()) throw std::invalid_argument("write_field_table: no components");
  const Grid& g = components.front().grid;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open field table for writing: " + path.string());
  out << "# aggflow field table v1\n";
  out << "dim " << g.dim() << "\nn " << g.n() << "\ncomponents " << components.size() << "\n";
  for (const auto& c : components) {
    require_same_grid(g, c.grid, "write_field_table");
    for (Index i = 0; i < g.size(); ++i) out << format_double(c.values[i]) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing field table: " + path.string());
}

std::vector<Field> read_field_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open field table: " + path.string());
  int dim = -1, n = -1, count = -1;
  std::string line;
  while ((dim < 0 || n < 0 || count < 0) && std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ls{std::string(t)};
    std::string key, value;
    ls >> key >> value;
    if (key == "dim") dim = static_cast<int>(parse_integer(value, "field table dim"));
    else if (key == "n") n = static_cast<int>(parse_integer(value, "field table n"));
    else if (key == "components") count = static_cast<int>(parse_integer(value, "field table components"));
    else throw std::runtime_error("field table " + path.string() + ": unexpected header key '" + key + "'");
  }
  if (dim < 0 || n < 0 || count < 1) throw std::runtime_error("field table " + path.string() + ": incomplete header");
  Grid g(dim, n);
  std::vector<Field> out;
  for (int c = 0; c < count; ++c) {
    Field f(g);
    for (Index i = 0; i < g.size(); ++i) {
      std::string token;
      if (!(in >> token)) throw std::runtime_error("field table " + path.string() + ": truncated value list");
      f.values[i] = parse_double(token, "field table value");
    }
    out.push_back(std::move(f));
  }
  std::string extra;
  if (in >> extra) throw std::runtime_error("field table " + path.string() + ": trailing data after values");
  return out;
}

}  // namespace aggflow
