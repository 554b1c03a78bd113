#include "rcp/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rcp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& field, double* out) {
  if (field.empty()) return false;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, *out);
  return ec == std::errc() && ptr == last;
}

LabeledDataset parse_csv(std::istream& in, Index p, Index d, const std::string& source) {
  if (p < 1 || d < 1) throw ArgumentError("load_csv: covariate and response counts must be >= 1");
  const auto width = static_cast<std::size_t>(p + d);
  std::vector<double> cells;
  std::string line;
  std::size_t line_no = 0;
  std::size_t rows = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) numeric = numeric && parse_double(fields[i], &values[i]);
    if (first_content) {
      first_content = false;
      if (!numeric) {
        if (fields.size() != width) {
          std::ostringstream msg;
          msg << source << ":" << line_no << ": header has " << fields.size() << " columns, expected p + d = "
              << width;
          throw ParseError(msg.str());
        }
        continue;
      }
    }
    if (fields.size() != width) {
      std::ostringstream msg;
      msg << source << ":" << line_no << ": expected " << width << " fields (p=" << p << ", d=" << d << "), found "
          << fields.size();
      throw ParseError(msg.str());
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!parse_double(fields[i], &values[i]) || !std::isfinite(values[i])) {
        std::ostringstream msg;
        msg << source << ":" << line_no << ": field " << i + 1 << " ('" << fields[i] << "') is not a finite number";
        throw ParseError(msg.str());
      }
    }
    cells.insert(cells.end(), values.begin(), values.end());
    ++rows;
  }
  if (rows == 0) throw ParseError(source + ": no data rows");
  Matrix x(static_cast<Index>(rows), p);
  Matrix y(static_cast<Index>(rows), d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (Index j = 0; j < p; ++j) x(static_cast<Index>(r), j) = cells[r * width + static_cast<std::size_t>(j)];
    for (Index j = 0; j < d; ++j) y(static_cast<Index>(r), j) = cells[r * width + static_cast<std::size_t>(p + j)];
  }
  return {std::move(x), std::move(y)};
}

LabeledDataset load_csv(const std::string& path, Index p, Index d) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_csv(in, p, d, path);
}

void write_csv(std::ostream& out, const LabeledDataset& data) {
  for (Index j = 0; j < data.covariate_dim(); ++j) out << (j ? "," : "") << 'x' << j;
  for (Index j = 0; j < data.response_dim(); ++j) out << ",y" << j;
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
  };
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.covariate_dim(); ++j) {
      if (j) out << ',';
      put(data.x()(i, j));
    }
    for (Index j = 0; j < data.response_dim(); ++j) {
      out << ',';
      put(data.y()(i, j));
    }
    out << '\n';
  }
}

void write_csv(const std::string& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(out, data);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace rcp
