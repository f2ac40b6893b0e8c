#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace openpimd {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sectioned key = value file, '#' comments. Keys are addressed as
// "section.key"; keys before the first section header have no prefix.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Numbers are written with 17 significant digits so a parse round-trip is
// exact and identical runs produce byte-identical files.
std::string format_double(double value);

void write_csv(const std::string& path,
               const std::vector<std::string>& header_comments,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const;
  int column_index(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// Two-column (q, V) profile tables in atomic units.
void write_profile(const std::string& path, const std::vector<double>& q,
                   const std::vector<double>& v);
std::pair<std::vector<double>, std::vector<double>> read_profile(
    const std::string& path);

std::uint64_t fnv1a_hash(const std::string& text);
std::string hex_id(std::uint64_t value);

// Binary helpers for checkpoints.
void write_u64(std::ostream& out, std::uint64_t value);
std::uint64_t read_u64(std::istream& in);
void write_doubles(std::ostream& out, const std::vector<double>& values);
std::vector<double> read_doubles(std::istream& in);

}  // namespace openpimd
