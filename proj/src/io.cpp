#include "openpimd/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace openpimd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
  KeyValueFile kv;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << "config line " << lineno << " is not 'key = value': " << line;
      throw ConfigError(msg.str());
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty config key");
    kv.values_[section.empty() ? key : section + "." + key] = value;
  }
  return kv;
}

std::string KeyValueFile::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::string KeyValueFile::get(const std::string& key,
                              const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not a number: " + it->second);
  }
}

long KeyValueFile::get_long(const std::string& key, long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const long v = std::stol(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not an integer: " + it->second);
  }
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError("config key " + key + " is not a boolean: " + it->second);
}

std::vector<double> KeyValueFile::get_doubles(const std::string& key) const {
  std::vector<double> out;
  const auto it = values_.find(key);
  if (it == values_.end()) return out;
  std::istringstream in(it->second);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_csv(const std::string& path,
               const std::vector<std::string>& header_comments,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  for (const auto& c : header_comments) out << "# " << c << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i)
    out << columns[i] << (i + 1 == columns.size() ? "\n" : ",");
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << format_double(row[i]) << (i + 1 == row.size() ? "\n" : ",");
  }
  if (!out) throw ConfigError("short write to " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  CsvTable table;
  std::string line;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(trim(line.substr(1)));
      continue;
    }
    std::istringstream ls(line);
    std::string tok;
    if (!header_done) {
      while (std::getline(ls, tok, ',')) table.columns.push_back(trim(tok));
      header_done = true;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
    if (!row.empty()) table.rows.push_back(std::move(row));
  }
  return table;
}

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw ConfigError("csv column not found: " + name);
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const int idx = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row.at(idx));
  return out;
}

void write_profile(const std::string& path, const std::vector<double>& q,
                   const std::vector<double>& v) {
  if (q.size() != v.size()) throw ConfigError("profile length mismatch");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  for (std::size_t i = 0; i < q.size(); ++i)
    out << format_double(q[i]) << " " << format_double(v[i]) << "\n";
}

std::pair<std::vector<double>, std::vector<double>> read_profile(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<double> q, v;
  double a, b;
  while (in >> a >> b) {
    q.push_back(a);
    v.push_back(b);
  }
  return {q, v};
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_id(std::uint64_t value) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

void write_u64(std::ostream& out, std::uint64_t value) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = (value >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw ConfigError("truncated binary stream");
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i)
    value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return value;
}

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  write_u64(out, values.size());
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
  }
}

std::vector<double> read_doubles(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > (1ULL << 32)) throw ConfigError("implausible array length");
  std::vector<double> values(n);
  for (auto& v : values) {
    const std::uint64_t bits = read_u64(in);
    std::memcpy(&v, &bits, 8);
  }
  return values;
}

}  // namespace openpimd

#include "openpimd/rng.hpp"

namespace openpimd {

void Rng::save(std::ostream& out) const {
  for (std::uint64_t w : state_) write_u64(out, w);
  write_u64(out, has_spare_ ? 1 : 0);
  std::uint64_t bits;
  std::memcpy(&bits, &spare_, 8);
  write_u64(out, bits);
}

void Rng::load(std::istream& in) {
  for (auto& w : state_) w = read_u64(in);
  has_spare_ = read_u64(in) != 0;
  const std::uint64_t bits = read_u64(in);
  std::memcpy(&spare_, &bits, 8);
}

}  // namespace openpimd
