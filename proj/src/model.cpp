#include "serpaudit/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>

#include "serpaudit/util.hpp"

namespace serpaudit {
namespace {

struct TermRow {
  const char* text;
  const char* slug;
  TermKind kind;
};

constexpr std::array<TermRow, SearchTerm::count> kTerms = {{
    {"CDU", "cdu", TermKind::party},
    {"CSU", "csu", TermKind::party},
    {"SPD", "spd", TermKind::party},
    {"AfD", "afd", TermKind::party},
    {"FDP", "fdp", TermKind::party},
    {"Die Linke", "die_linke", TermKind::party},
    {"Bündnis90/Die Grünen", "buendnis90_die_gruenen", TermKind::party},
    {"Angela Merkel", "angela_merkel", TermKind::person},
    {"Martin Schulz", "martin_schulz", TermKind::person},
    {"Christian Lindner", "christian_lindner", TermKind::person},
    {"Katrin Göring-Eckardt", "katrin_goering_eckardt", TermKind::person},
    {"Cem Özdemir", "cem_oezdemir", TermKind::person},
    {"Sahra Wagenknecht", "sahra_wagenknecht", TermKind::person},
    {"Dietmar Bartsch", "dietmar_bartsch", TermKind::person},
    {"Alice Weidel", "alice_weidel", TermKind::person},
    {"Alexander Gauland", "alexander_gauland", TermKind::person},
}};

const std::vector<std::string>& term_texts() {
  static const std::vector<std::string> texts = [] {
    std::vector<std::string> v;
    for (const auto& row : kTerms) v.emplace_back(row.text);
    return v;
  }();
  return texts;
}

const std::vector<std::string>& term_slugs() {
  static const std::vector<std::string> slugs = [] {
    std::vector<std::string> v;
    for (const auto& row : kTerms) v.emplace_back(row.slug);
    return v;
  }();
  return slugs;
}

bool parse_int_field(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

SearchTerm SearchTerm::from_index(int index) {
  if (index < 0 || index >= count) throw std::out_of_range("SearchTerm index out of range");
  return SearchTerm(index);
}

std::optional<SearchTerm> SearchTerm::from_text(std::string_view text) {
  for (int i = 0; i < count; ++i) {
    if (text == kTerms[i].text) return SearchTerm(i);
  }
  return std::nullopt;
}

std::optional<SearchTerm> SearchTerm::from_slug(std::string_view slug) {
  for (int i = 0; i < count; ++i) {
    if (slug == kTerms[i].slug) return SearchTerm(i);
  }
  return std::nullopt;
}

const std::vector<SearchTerm>& SearchTerm::all() {
  static const std::vector<SearchTerm> terms = [] {
    std::vector<SearchTerm> v;
    for (int i = 0; i < count; ++i) v.push_back(SearchTerm(i));
    return v;
  }();
  return terms;
}

const std::string& SearchTerm::text() const { return term_texts()[index_]; }
const std::string& SearchTerm::slug() const { return term_slugs()[index_]; }
TermKind SearchTerm::kind() const { return kTerms[index_].kind; }

long days_from_civil(const Date& d) {
  int y = d.year - (d.month <= 2);
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      static_cast<unsigned>((153 * (d.month + (d.month > 2 ? -3 : 9)) + 2) / 5 + d.day - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

Date civil_from_days(long z) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long y = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned day = doy - (153 * mp + 2) / 5 + 1;
  const unsigned month = mp + (mp < 10 ? 3 : -9);
  return Date{static_cast<int>(y + (month <= 2)), static_cast<int>(month), static_cast<int>(day)};
}

int weekday(const Date& d) {
  long days = days_from_civil(d);
  return static_cast<int>(((days % 7) + 11) % 7);  // 1970-01-01 is Thursday (4)
}

bool is_weekday(const Date& d) {
  int wd = weekday(d);
  return wd >= 1 && wd <= 5;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  Date d;
  if (!parse_int_field(text.substr(0, 4), d.year) || !parse_int_field(text.substr(5, 2), d.month) ||
      !parse_int_field(text.substr(8, 2), d.day)) {
    return std::nullopt;
  }
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) return std::nullopt;
  if (civil_from_days(days_from_civil(d)) != d) return std::nullopt;
  return d;
}

int slot_hour(Slot s) {
  switch (s) {
    case Slot::h12: return 12;
    case Slot::h16: return 16;
    case Slot::h20: return 20;
  }
  return 0;
}

std::optional<Slot> slot_from_hour(int hour) {
  switch (hour) {
    case 12: return Slot::h12;
    case 16: return Slot::h16;
    case 20: return Slot::h20;
    default: return std::nullopt;
  }
}

namespace {

const std::vector<Date>& admissible_days() {
  static const std::vector<Date> days = [] {
    std::vector<Date> v;
    const long first = days_from_civil(Date{2017, 8, 21});
    const long last = days_from_civil(Date{2017, 9, 24});
    const Date sat{2017, 9, 23};
    const Date sun{2017, 9, 24};
    for (long z = first; z <= last; ++z) {
      Date d = civil_from_days(z);
      if (is_weekday(d) || d == sat || d == sun) v.push_back(d);
    }
    return v;
  }();
  return days;
}

}  // namespace

SearchTimeKey SearchTimeKey::from_index(int index) {
  if (index < 0 || index >= count) throw std::out_of_range("SearchTimeKey index out of range");
  return SearchTimeKey(index);
}

std::optional<SearchTimeKey> SearchTimeKey::from_date_slot(const Date& date, Slot slot) {
  const auto& days = admissible_days();
  auto it = std::lower_bound(days.begin(), days.end(), date);
  if (it == days.end() || *it != date) return std::nullopt;
  int day_index = static_cast<int>(it - days.begin());
  return SearchTimeKey(day_index * 3 + static_cast<int>(slot));
}

const std::vector<SearchTimeKey>& SearchTimeKey::all() {
  static const std::vector<SearchTimeKey> keys = [] {
    std::vector<SearchTimeKey> v;
    for (int i = 0; i < count; ++i) v.push_back(SearchTimeKey(i));
    return v;
  }();
  return keys;
}

Date SearchTimeKey::date() const { return admissible_days()[index_ / 3]; }
Slot SearchTimeKey::slot() const { return static_cast<Slot>(index_ % 3); }

std::string SearchTimeKey::label() const {
  char buf[24];
  Date d = date();
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d", d.year, d.month, d.day,
                slot_hour(slot()));
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  if (text.size() >= 1 && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() < 19) return std::nullopt;
  auto date = parse_date(text.substr(0, 10));
  if (!date) return std::nullopt;
  if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
  if (text[13] != ':' || text[16] != ':') return std::nullopt;
  Timestamp t;
  t.date = *date;
  if (!parse_int_field(text.substr(11, 2), t.hour) ||
      !parse_int_field(text.substr(14, 2), t.minute) ||
      !parse_int_field(text.substr(17, 2), t.second)) {
    return std::nullopt;
  }
  if (t.hour > 23 || t.minute > 59 || t.second > 60) return std::nullopt;
  if (text.size() > 19) {
    if (text[19] != '.' || text.size() == 20 || text.size() > 23) return std::nullopt;
    std::string_view frac = text.substr(20);
    int value = 0;
    if (!parse_int_field(frac, value)) return std::nullopt;
    for (std::size_t i = frac.size(); i < 3; ++i) value *= 10;
    t.millisecond = value;
  }
  return t;
}

std::string format_timestamp(const Timestamp& t) {
  char buf[32];
  if (t.millisecond > 0) {
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d.%03d", t.date.year,
                  t.date.month, t.date.day, t.hour, t.minute, t.second, t.millisecond);
  } else {
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", t.date.year, t.date.month,
                  t.date.day, t.hour, t.minute, t.second);
  }
  return buf;
}

std::optional<SearchTimeKey> time_key_of(const Timestamp& t) {
  auto slot = slot_from_hour(t.hour);
  if (!slot) return std::nullopt;
  return SearchTimeKey::from_date_slot(t.date, *slot);
}

std::string_view to_string(EntryKind k) {
  switch (k) {
    case EntryKind::top_story: return "top_story";
    case EntryKind::organic: return "organic";
    case EntryKind::news: return "news";
  }
  return "";
}

std::string_view to_string(SearchType t) {
  return t == SearchType::google_search ? "google_search" : "google_news";
}

std::optional<EntryKind> entry_kind_from_string(std::string_view s) {
  if (s == "top_story") return EntryKind::top_story;
  if (s == "organic") return EntryKind::organic;
  if (s == "news") return EntryKind::news;
  return std::nullopt;
}

std::optional<SearchType> search_type_from_string(std::string_view s) {
  if (s == "google_search") return SearchType::google_search;
  if (s == "google_news") return SearchType::google_news;
  return std::nullopt;
}

std::optional<Tld> try_extract_tld(std::string_view url) {
  std::string_view rest = util::trim(url);
  if (rest.empty()) return std::nullopt;
  auto scheme_pos = rest.find("://");
  if (scheme_pos != std::string_view::npos) {
    std::string_view scheme = rest.substr(0, scheme_pos);
    if (scheme.empty() || !std::isalpha(static_cast<unsigned char>(scheme[0]))) {
      return std::nullopt;
    }
    for (char c : scheme) {
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') {
        return std::nullopt;
      }
    }
    rest.remove_prefix(scheme_pos + 3);
  }
  auto end = rest.find_first_of("/?#");
  std::string_view host = end == std::string_view::npos ? rest : rest.substr(0, end);
  if (host.empty()) return std::nullopt;
  for (char c : host) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '\\') return std::nullopt;
  }
  return Tld{util::to_lower(host)};
}

Tld extract_tld(std::string_view url) {
  auto tld = try_extract_tld(url);
  if (!tld) throw UrlError(std::string(url));
  return *tld;
}

}  // namespace serpaudit
