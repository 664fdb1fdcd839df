#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace serpaudit {

enum class TermKind { party, person };

// One of the 16 fixed query strings. Value type backed by an index into the
// static term table; construction from free text is validated.
class SearchTerm {
 public:
  static constexpr int count = 16;

  static SearchTerm from_index(int index);
  static std::optional<SearchTerm> from_text(std::string_view text);
  static std::optional<SearchTerm> from_slug(std::string_view slug);
  static const std::vector<SearchTerm>& all();

  int index() const { return index_; }
  const std::string& text() const;
  // Filesystem-safe ASCII name ("buendnis90_die_gruenen").
  const std::string& slug() const;
  TermKind kind() const;

  auto operator<=>(const SearchTerm&) const = default;

 private:
  explicit SearchTerm(int index) : index_(index) {}
  int index_;
};

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  auto operator<=>(const Date&) const = default;
};

// Days since 1970-01-01 (proleptic Gregorian).
long days_from_civil(const Date& d);
Date civil_from_days(long days);
// 0 = Sunday .. 6 = Saturday.
int weekday(const Date& d);
bool is_weekday(const Date& d);
std::string format_date(const Date& d);
std::optional<Date> parse_date(std::string_view text);

enum class Slot { h12 = 0, h16 = 1, h20 = 2 };

int slot_hour(Slot s);
std::optional<Slot> slot_from_hour(int hour);

// One of the 81 admissible (day, slot) pairs of the investigation period:
// weekdays 2017-08-21..2017-09-22 plus the election weekend Sep 23/24,
// three slots each.
class SearchTimeKey {
 public:
  static constexpr int count = 81;

  static SearchTimeKey from_index(int index);
  static std::optional<SearchTimeKey> from_date_slot(const Date& date, Slot slot);
  static const std::vector<SearchTimeKey>& all();

  int index() const { return index_; }
  Date date() const;
  Slot slot() const;
  // "2017-08-21T12" style label used in exports.
  std::string label() const;

  auto operator<=>(const SearchTimeKey&) const = default;

 private:
  explicit SearchTimeKey(int index) : index_(index) {}
  int index_;
};

struct Timestamp {
  Date date;
  int hour = 0;
  int minute = 0;
  int second = 0;
  int millisecond = 0;

  auto operator<=>(const Timestamp&) const = default;
};

// Accepts "YYYY-MM-DD HH:MM:SS" or with 'T'; optional ".fff"; optional 'Z'.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(const Timestamp& t);

// A timestamp maps to slot S on an admissible date iff it lies in [S, S+60min).
std::optional<SearchTimeKey> time_key_of(const Timestamp& t);

enum class EntryKind { top_story, organic, news };
enum class SearchType { google_search, google_news };

std::string_view to_string(EntryKind k);
std::string_view to_string(SearchType t);
std::optional<EntryKind> entry_kind_from_string(std::string_view s);
std::optional<SearchType> search_type_from_string(std::string_view s);

struct ResultEntry {
  int rank = 0;
  EntryKind kind = EntryKind::organic;
  std::string url;
  std::optional<std::string> link_text;
  std::optional<std::string> age_string;
  std::optional<std::string> medium;
  std::optional<std::string> title;

  bool operator==(const ResultEntry&) const = default;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  std::string country;

  bool operator==(const GeoPoint&) const = default;
};

// One donated first-results-page for (donor, term, timestamp).
struct DonationRecord {
  std::string donor_id;
  SearchType search_type = SearchType::google_search;
  SearchTerm term = SearchTerm::from_index(0);
  Timestamp timestamp;
  bool logged_in = false;
  std::string browser_language;
  GeoPoint geo;
  std::vector<ResultEntry> entries;

  bool operator==(const DonationRecord&) const = default;
};

// Cleaned, canonical list keyed by (donor, term, SearchTimeKey).
// top_story_age_strings runs parallel to top_stories; empty string = absent.
struct ResultList {
  std::string donor_id;
  SearchTerm term = SearchTerm::from_index(0);
  SearchTimeKey time_key = SearchTimeKey::from_index(0);
  SearchType search_type = SearchType::google_search;
  Timestamp timestamp;
  std::vector<std::string> top_stories;
  std::vector<std::string> top_story_age_strings;
  std::vector<std::string> organic;

  bool operator==(const ResultList&) const = default;
};

// Lowercase host string, scheme and path stripped.
struct Tld {
  std::string value;

  auto operator<=>(const Tld&) const = default;
};

class UrlError : public std::runtime_error {
 public:
  explicit UrlError(std::string url)
      : std::runtime_error("no recognizable host in url: " + url), url_(std::move(url)) {}
  const std::string& url() const { return url_; }

 private:
  std::string url_;
};

// Host between the scheme (if any) and the first following slash, lowercased.
// No "www." removal, no punycode; ports kept.
Tld extract_tld(std::string_view url);
std::optional<Tld> try_extract_tld(std::string_view url);

}  // namespace serpaudit
