#include "cspcr/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace cspcr {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

double parse_cell(const std::string& cell, int row, const std::string& col) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ValidationError(ValidationError::Kind::other,
                          "cannot parse '" + cell + "' in column " + col +
                              " at data row " + std::to_string(row),
                          row, col);
  return value;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Parsed header layout: positions of y/x, contiguous z_1..z_p and v_1..v_d
// blocks, everything else kept as named extras.
struct Header {
  int y = -1, x = -1;
  std::vector<int> z, v;          // column index per coordinate
  std::vector<std::pair<std::string, int>> extras;
};

Header parse_header(const std::vector<std::string>& names, bool require_y) {
  Header h;
  std::map<int, int> z_cols, v_cols;
  for (int c = 0; c < static_cast<int>(names.size()); ++c) {
    const std::string& name = names[static_cast<std::size_t>(c)];
    if (name == "y") {
      h.y = c;
    } else if (name == "x") {
      h.x = c;
    } else if (name.rfind("z_", 0) == 0 || name.rfind("v_", 0) == 0) {
      int k = 0;
      const char* begin = name.data() + 2;
      const char* end = name.data() + name.size();
      const auto res = std::from_chars(begin, end, k);
      if (res.ec != std::errc{} || res.ptr != end || k < 1)
        throw ValidationError(ValidationError::Kind::other,
                              "bad column name: " + name);
      (name[0] == 'z' ? z_cols : v_cols)[k] = c;
    } else {
      h.extras.emplace_back(name, c);
    }
  }
  if (require_y && h.y < 0)
    throw ValidationError(ValidationError::Kind::other, "missing column y");
  if (h.x < 0)
    throw ValidationError(ValidationError::Kind::other, "missing column x");
  auto collect = [](const std::map<int, int>& cols, const char* prefix) {
    std::vector<int> out;
    int expected = 1;
    for (const auto& [k, c] : cols) {
      if (k != expected)
        throw ValidationError(ValidationError::Kind::other,
            std::string(prefix) + " columns must be contiguous from " +
                prefix + "_1");
      out.push_back(c);
      ++expected;
    }
    return out;
  };
  h.z = collect(z_cols, "z");
  h.v = collect(v_cols, "v");
  return h;
}

struct Parsed {
  Eigen::VectorXd y, x;
  RowMatrix z, v;
  std::map<std::string, Eigen::VectorXd> extras;
};

Parsed parse_csv(const std::string& path, bool require_y) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError(ValidationError::Kind::other,
                          "cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(ValidationError::Kind::empty,
                          "empty file: " + path);
  const auto names = split_line(line);
  const Header h = parse_header(names, require_y);

  std::vector<std::vector<double>> rows;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != names.size())
      throw ValidationError(ValidationError::Kind::dimension_mismatch,
                            "row " + std::to_string(row) + " has " +
                                std::to_string(cells.size()) +
                                " cells, header has " +
                                std::to_string(names.size()),
                            row);
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      values[c] = parse_cell(cells[c], row, names[c]);
    rows.push_back(std::move(values));
    ++row;
  }
  if (rows.empty())
    throw ValidationError(ValidationError::Kind::empty,
                          "no data rows in " + path);

  const int n = static_cast<int>(rows.size());
  Parsed out;
  out.x.resize(n);
  if (require_y || h.y >= 0) out.y.resize(n);
  out.z.resize(n, static_cast<int>(h.z.size()));
  out.v.resize(n, static_cast<int>(h.v.size()));
  for (auto& [name, col] : h.extras) out.extras[name] = Eigen::VectorXd(n);

  for (int i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (h.y >= 0 && out.y.size() > 0) out.y[i] = r[static_cast<std::size_t>(h.y)];
    out.x[i] = r[static_cast<std::size_t>(h.x)];
    for (std::size_t k = 0; k < h.z.size(); ++k)
      out.z(i, static_cast<int>(k)) = r[static_cast<std::size_t>(h.z[k])];
    for (std::size_t k = 0; k < h.v.size(); ++k)
      out.v(i, static_cast<int>(k)) = r[static_cast<std::size_t>(h.v[k])];
    for (auto& [name, col] : h.extras)
      out.extras[name][i] = r[static_cast<std::size_t>(col)];
  }
  return out;
}

}  // namespace

DataFile read_data_csv(const std::string& path) {
  Parsed p = parse_csv(path, true);
  DataFile f;
  f.dataset = SourceDataset(std::move(p.y), std::move(p.x), std::move(p.z),
                            std::move(p.v));
  f.extra_columns = std::move(p.extras);
  return f;
}

UnlabeledPool read_pool_csv(const std::string& path, Population population) {
  Parsed p = parse_csv(path, false);
  return UnlabeledPool(population, std::move(p.x), std::move(p.z),
                       std::move(p.v));
}

std::string dataset_to_csv(const SourceDataset& dataset,
                           const Eigen::VectorXd* weights) {
  std::string out = "y,x";
  for (int k = 1; k <= dataset.zdim(); ++k) out += ",z_" + std::to_string(k);
  for (int k = 1; k <= dataset.vdim(); ++k) out += ",v_" + std::to_string(k);
  if (weights) out += ",w";
  out += '\n';
  for (int i = 0; i < dataset.n(); ++i) {
    out += format_double(dataset.y()[i]);
    out += ',';
    out += format_double(dataset.x()[i]);
    for (int k = 0; k < dataset.zdim(); ++k) {
      out += ',';
      out += format_double(dataset.z()(i, k));
    }
    for (int k = 0; k < dataset.vdim(); ++k) {
      out += ',';
      out += format_double(dataset.v()(i, k));
    }
    if (weights) {
      out += ',';
      out += format_double((*weights)[i]);
    }
    out += '\n';
  }
  return out;
}

std::string pool_to_csv(const UnlabeledPool& pool) {
  std::string out = "x";
  for (int k = 1; k <= pool.zdim(); ++k) out += ",z_" + std::to_string(k);
  for (int k = 1; k <= pool.vdim(); ++k) out += ",v_" + std::to_string(k);
  out += '\n';
  for (int i = 0; i < pool.n(); ++i) {
    out += format_double(pool.x()[i]);
    for (int k = 0; k < pool.zdim(); ++k) {
      out += ',';
      out += format_double(pool.z()(i, k));
    }
    for (int k = 0; k < pool.vdim(); ++k) {
      out += ',';
      out += format_double(pool.v()(i, k));
    }
    out += '\n';
  }
  return out;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ValidationError(ValidationError::Kind::other,
                          "cannot write file: " + path);
  out << contents;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError(ValidationError::Kind::other,
                          "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cspcr
