#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>

#include "serpaudit/ingest.hpp"
#include "serpaudit/util.hpp"

using namespace serpaudit;

namespace {

std::string record_json(const std::string& donor, const std::string& term,
                        const std::string& timestamp, const std::string& entries,
                        const std::string& search_type = "google_search",
                        bool logged_in = false, const std::string& country = "DE") {
  return "{\"donor_id\":\"" + donor + "\",\"search_type\":\"" + search_type +
         "\",\"term\":\"" + term + "\",\"timestamp\":\"" + timestamp +
         "\",\"logged_in\":" + (logged_in ? "true" : "false") +
         ",\"browser_language\":\"de\",\"lat\":52.52,\"lon\":13.405,\"country\":\"" + country +
         "\",\"entries\":[" + entries + "]}";
}

std::string entry_json(int rank, const std::string& url, const std::string& kind,
                       const std::string& extra = "") {
  return "{\"rank\":" + std::to_string(rank) + ",\"url\":\"" + url + "\",\"kind\":\"" + kind +
         "\"" + extra + "}";
}

}  // namespace

TEST_CASE("record parse / serialize round trip") {
  std::string line = record_json(
      "donor-1", "AfD", "2017-08-21 12:05:00",
      entry_json(1, "https://spiegel.de/a", "top_story", ",\"age_string\":\"Vor 2 Stunden\"") +
          "," + entry_json(2, "https://faz.net/b", "organic", ",\"link_text\":\"FAZ\""));
  std::string reason;
  auto record = parse_record_line(line, reason);
  REQUIRE(record.has_value());
  CHECK(record->donor_id == "donor-1");
  CHECK(record->term.text() == "AfD");
  CHECK(record->entries.size() == 2);
  CHECK(record->entries[0].kind == EntryKind::top_story);
  CHECK(record->entries[0].age_string == "Vor 2 Stunden");
  CHECK(record->entries[1].link_text == "FAZ");
  CHECK_FALSE(record->entries[1].age_string.has_value());

  auto reparsed = parse_record_line(serialize_record(*record), reason);
  REQUIRE(reparsed.has_value());
  CHECK(*reparsed == *record);
}

TEST_CASE("malformed lines are rejected with a reason, never dropped silently") {
  auto reject_reason = [](const std::string& line) {
    std::string reason;
    auto record = parse_record_line(line, reason);
    CHECK_FALSE(record.has_value());
    return reason;
  };
  CHECK(reject_reason("{not json") == "invalid json");
  CHECK(reject_reason("[1,2]") == "not a json object");
  CHECK(reject_reason(record_json("d", "Nichtpartei", "2017-08-21 12:00:00",
                                  entry_json(1, "x.de", "organic"))) == "unknown term");
  CHECK(reject_reason(record_json("d", "SPD", "2017-08-21 12:00:00",
                                  entry_json(2, "x.de", "organic"))) == "rank gap");
  CHECK(reject_reason(record_json("d", "SPD", "2017-08-21 12:00:00",
                                  entry_json(1, "x.de", "organic"), "google_search", false,
                                  "Deutschland")) == "bad country");
  CHECK(reject_reason(record_json(
            "d", "SPD", "2017-08-21 12:00:00",
            entry_json(1, "x.de", "organic", ",\"age_string\":\"Vor 1 Tag\""))) ==
        "age_string on organic entry");
  CHECK(reject_reason(record_json("d", "SPD", "not a time",
                                  entry_json(1, "x.de", "organic"))) == "bad timestamp");

  std::string good = record_json("d", "SPD", "2017-08-21 12:00:00",
                                 entry_json(1, "x.de", "organic"));
  auto result = parse_records(good + "\n\n{bad\n" + good + "\n", "test");
  CHECK(result.dataset.records.size() == 2);
  REQUIRE(result.rejects.size() == 1);
  CHECK(result.rejects[0].line_number == 3);  // blank line still advances the counter
  CHECK(result.rejects[0].reason == "invalid json");
}

TEST_CASE("summarize: per-day majority login, ties count as logged out") {
  std::string lines;
  // donor A on Aug 21: 2 logged-in, 1 logged-out -> logged_in.
  lines += record_json("A", "SPD", "2017-08-21 12:00:00", entry_json(1, "x.de", "organic"),
                       "google_search", true) + "\n";
  lines += record_json("A", "CDU", "2017-08-21 16:00:00", entry_json(1, "x.de", "organic"),
                       "google_search", true) + "\n";
  lines += record_json("A", "CSU", "2017-08-21 20:00:00", entry_json(1, "x.de", "organic"),
                       "google_search", false) + "\n";
  // donor B on Aug 21: 1/1 tie -> logged_out.
  lines += record_json("B", "SPD", "2017-08-21 12:01:00", entry_json(1, "x.de", "organic"),
                       "google_search", true) + "\n";
  lines += record_json("B", "SPD", "2017-08-21 16:01:00", entry_json(1, "x.de", "organic"),
                       "google_search", false) + "\n";
  // donor B again on Aug 22, from Austria, via news.
  lines += record_json("B", "SPD", "2017-08-22 12:00:00", entry_json(1, "x.de", "news"),
                       "google_news", true, "AT") + "\n";
  auto result = parse_records(lines, "test");
  REQUIRE(result.rejects.empty());
  auto summary = summarize(result.dataset);
  CHECK(summary.total_records == 6);
  CHECK(summary.records_google_search == 5);
  CHECK(summary.records_google_news == 1);
  REQUIRE(summary.per_day.size() == 2);
  CHECK(summary.per_day[0].date == Date{2017, 8, 21});
  CHECK(summary.per_day[0].logged_in == 1);
  CHECK(summary.per_day[0].logged_out == 1);
  CHECK(summary.per_day[1].logged_in == 1);
  CHECK(summary.per_day[1].logged_out == 0);
  REQUIRE(summary.donors_per_country.size() == 2);
  CHECK(summary.donors_per_country[0] == std::pair<std::string, std::size_t>{"AT", 1});
  CHECK(summary.donors_per_country[1] == std::pair<std::string, std::size_t>{"DE", 2});
  // Term rows cover the whole fixed table in table order.
  REQUIRE(summary.records_per_term.size() == 16);
  CHECK(summary.records_per_term[2] == std::pair<std::string, std::size_t>{"SPD", 4});
  CHECK(summary.records_per_term[3] == std::pair<std::string, std::size_t>{"AfD", 0});
}

TEST_CASE("export_locations buckets rounded coordinates and marks retention") {
  Dataset dataset;
  std::string reason;
  auto base = record_json("A", "SPD", "2017-08-21 12:00:00", entry_json(1, "x.de", "organic"));
  auto record = *parse_record_line(base, reason);
  record.geo = {52.5211, 13.4049, "DE"};
  dataset.records.push_back(record);
  record.donor_id = "B";
  record.geo = {52.5193, 13.3962, "DE"};  // rounds to the same (52.52, 13.40)
  dataset.records.push_back(record);
  record.donor_id = "C";
  record.geo = {48.14, 11.58, "DE"};
  dataset.records.push_back(record);

  auto rows = export_locations(dataset, nullptr);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) CHECK(row.retained);

  std::set<std::string> retained{"C"};
  rows = export_locations(dataset, &retained);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].lat == 48.14);
  CHECK(rows[0].donor_count == 1);
  CHECK(rows[0].retained);
  CHECK(rows[1].lat == 52.52);
  CHECK(rows[1].lon == 13.4);
  CHECK(rows[1].donor_count == 2);
  CHECK_FALSE(rows[1].retained);
}

TEST_CASE("gzip line round trip is transparent and byte-deterministic") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path();
  auto gz_a = (dir / "serpaudit_lines_a.jsonl.gz").string();
  auto gz_b = (dir / "serpaudit_lines_b.jsonl.gz").string();
  auto plain = (dir / "serpaudit_lines.jsonl").string();

  std::vector<std::string> lines{"alpha", "", "beta\twith tab", "gamma"};
  for (const auto& path : {gz_a, gz_b, plain}) {
    LineSink sink(path);
    for (const auto& line : lines) sink.write(line);
    sink.close();
  }
  for (const auto& path : {gz_a, plain}) {
    LineSource source(path);
    std::string line;
    std::vector<std::string> read_back;
    while (source.next(line)) read_back.push_back(line);
    CHECK(read_back == lines);
  }
  // Same content written at different moments: identical bytes (no mtime in header).
  CHECK(util::read_text_file(gz_a) == util::read_text_file(gz_b));
  for (const auto& path : {gz_a, gz_b, plain}) std::remove(path.c_str());
}

TEST_CASE("load_records_file reads gzip record files") {
  namespace fs = std::filesystem;
  auto path = (fs::temp_directory_path() / "serpaudit_records.jsonl.gz").string();
  {
    LineSink sink(path);
    sink.write(record_json("A", "SPD", "2017-08-21 12:00:00", entry_json(1, "x.de", "organic")));
    sink.write("{broken");
    sink.write(record_json("B", "CDU", "2017-08-21 16:00:00", entry_json(1, "y.de", "organic")));
    sink.close();
  }
  auto result = load_records_file(path);
  CHECK(result.dataset.records.size() == 2);
  REQUIRE(result.rejects.size() == 1);
  CHECK(result.rejects[0].line_number == 2);
  std::remove(path.c_str());
}
