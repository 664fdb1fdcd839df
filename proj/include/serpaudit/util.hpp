#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace serpaudit::util {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);
std::vector<std::string> split(std::string_view s, char sep);

/// Fixed-point decimal rendering, locale-independent ("%.*f").
std::string format_fixed(double value, int decimals);

/// Deterministic 64-bit RNG (splitmix64 steps). Stream derivation is by
/// mixing the seed with caller-supplied tags, so generation order never
/// affects the values a stream produces.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  /// Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Uniform double in [0, 1).
  double unit();
  /// k distinct values from [0, n), ascending.
  std::vector<std::uint64_t> sample_distinct(std::uint64_t n, std::size_t k);

  static std::uint64_t mix(std::uint64_t x);
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

 private:
  std::uint64_t state_;
};

/// SHA-256 of a byte buffer / file, hex-encoded.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file_hex(const std::string& path);

/// Tab-separated table writer. All CLI artifacts go through this so the
/// byte layout is uniform: header row, '\t' separators, '\n' line ends.
class TsvWriter {
 public:
  explicit TsvWriter(std::vector<std::string> header);
  void add_row(std::vector<std::string> cells);
  std::string to_string() const;
  void write_file(const std::string& path) const;
  std::size_t n_rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Runs fn(i) for i in [0, n) on `threads` workers. Results must be written
/// to per-index slots by the caller; the schedule is not observable in the
/// output, so worker count cannot change any artifact.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace serpaudit::util
