#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "serpaudit/model.hpp"

namespace serpaudit {

struct Provenance {
  std::vector<std::string> sources;
  std::string loaded_at;  // in-memory only, never written to artifacts
};

struct Dataset {
  std::vector<DonationRecord> records;
  Provenance provenance;
};

struct ParseReject {
  std::size_t line_number = 0;
  std::string reason;
};

struct ParseResult {
  Dataset dataset;
  std::vector<ParseReject> rejects;
};

// One JSON object per line; malformed lines are collected, never dropped.
std::optional<DonationRecord> parse_record_line(std::string_view line, std::string& reason);
ParseResult parse_records(std::string_view text, const std::string& source_name);
// Reads .jsonl or .jsonl.gz (gzip detection is transparent).
ParseResult load_records_file(const std::string& path);

std::string serialize_record(const DonationRecord& record);
std::string serialize_records(const Dataset& dataset);

// Line-oriented reader; handles plain and gzip files alike.
class LineSource {
 public:
  explicit LineSource(const std::string& path);
  ~LineSource();
  LineSource(const LineSource&) = delete;
  LineSource& operator=(const LineSource&) = delete;

  // Strips the trailing newline (and carriage return). False at end of file.
  bool next(std::string& line);

 private:
  void* gz_ = nullptr;
};

// Line-oriented writer; a ".gz" suffix selects gzip output. The gzip header
// carries no timestamp, so equal lines give equal bytes.
class LineSink {
 public:
  explicit LineSink(const std::string& path);
  ~LineSink();
  LineSink(const LineSink&) = delete;
  LineSink& operator=(const LineSink&) = delete;

  void write(std::string_view line);
  void close();

 private:
  void* gz_ = nullptr;
  void* plain_ = nullptr;
};

struct DailyDonorCount {
  Date date;
  std::size_t logged_in = 0;
  std::size_t logged_out = 0;
};

struct DatasetSummary {
  std::size_t total_records = 0;
  std::size_t records_google_search = 0;
  std::size_t records_google_news = 0;
  std::vector<DailyDonorCount> per_day;                            // sorted by date
  std::vector<std::pair<std::string, std::size_t>> donors_per_country;  // sorted by country
  std::vector<std::pair<std::string, std::size_t>> records_per_term;    // term-table order
};

// Per-day donor count = distinct donor_ids with at least one record that
// day; each donor falls under the majority login state of that day's
// records, ties under logged_out.
DatasetSummary summarize(const Dataset& dataset);

struct LocationRow {
  double lat = 0.0;  // rounded to 2 decimals
  double lon = 0.0;
  std::string country;
  std::size_t donor_count = 0;
  bool retained = false;
};

// One row per distinct (rounded lat, rounded lon, country); retained is true
// iff any donor at the coordinate survived cleaning (all true when
// retained_donors is null).
std::vector<LocationRow> export_locations(const Dataset& dataset,
                                          const std::set<std::string>* retained_donors);

}  // namespace serpaudit
