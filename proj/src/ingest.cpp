#include "serpaudit/ingest.hpp"

#include <zlib.h>

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <stdexcept>
#include <tuple>

#include <nlohmann/json.hpp>

#include "serpaudit/util.hpp"

namespace serpaudit {
namespace {

using nlohmann::json;

void append_json_string(std::string& out, std::string_view s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

void append_int(std::string& out, long long v) {
  char buf[24];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

bool get_string(const json& j, const char* key, std::string& out) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return false;
  out = it->get<std::string>();
  return true;
}

bool get_optional_string(const json& j, const char* key, std::optional<std::string>& out,
                         bool& bad) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return false;
  if (!it->is_string()) {
    bad = true;
    return false;
  }
  out = it->get<std::string>();
  return true;
}

bool get_double(const json& j, const char* key, double& out) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) return false;
  out = it->get<double>();
  return true;
}

bool valid_country(std::string_view s) {
  return s.size() == 2 && std::isalpha(static_cast<unsigned char>(s[0])) &&
         std::isalpha(static_cast<unsigned char>(s[1]));
}

}  // namespace

std::optional<DonationRecord> parse_record_line(std::string_view line, std::string& reason) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) {
    reason = "invalid json";
    return std::nullopt;
  }
  if (!j.is_object()) {
    reason = "not a json object";
    return std::nullopt;
  }
  DonationRecord r;
  if (!get_string(j, "donor_id", r.donor_id) || r.donor_id.empty()) {
    reason = "bad donor_id";
    return std::nullopt;
  }
  std::string text;
  if (!get_string(j, "search_type", text)) {
    reason = "bad search_type";
    return std::nullopt;
  }
  if (auto st = search_type_from_string(text)) {
    r.search_type = *st;
  } else {
    reason = "bad search_type";
    return std::nullopt;
  }
  if (!get_string(j, "term", text)) {
    reason = "missing term";
    return std::nullopt;
  }
  if (auto term = SearchTerm::from_text(text)) {
    r.term = *term;
  } else {
    reason = "unknown term";
    return std::nullopt;
  }
  if (!get_string(j, "timestamp", text)) {
    reason = "bad timestamp";
    return std::nullopt;
  }
  if (auto ts = parse_timestamp(text)) {
    r.timestamp = *ts;
  } else {
    reason = "bad timestamp";
    return std::nullopt;
  }
  {
    auto it = j.find("logged_in");
    if (it == j.end() || !it->is_boolean()) {
      reason = "bad logged_in";
      return std::nullopt;
    }
    r.logged_in = it->get<bool>();
  }
  if (!get_string(j, "browser_language", r.browser_language) || r.browser_language.empty()) {
    reason = "bad browser_language";
    return std::nullopt;
  }
  if (!get_double(j, "lat", r.geo.lat)) {
    reason = "bad lat";
    return std::nullopt;
  }
  if (!get_double(j, "lon", r.geo.lon)) {
    reason = "bad lon";
    return std::nullopt;
  }
  if (!get_string(j, "country", r.geo.country) || !valid_country(r.geo.country)) {
    reason = "bad country";
    return std::nullopt;
  }
  auto entries_it = j.find("entries");
  if (entries_it == j.end() || !entries_it->is_array()) {
    reason = "bad entries";
    return std::nullopt;
  }
  int expected_rank = 1;
  for (const auto& e : *entries_it) {
    if (!e.is_object()) {
      reason = "bad entry";
      return std::nullopt;
    }
    ResultEntry entry;
    {
      auto it = e.find("rank");
      if (it == e.end() || !it->is_number_integer()) {
        reason = "bad rank";
        return std::nullopt;
      }
      entry.rank = it->get<int>();
    }
    if (entry.rank != expected_rank) {
      reason = "rank gap";
      return std::nullopt;
    }
    ++expected_rank;
    if (!get_string(e, "url", entry.url) || entry.url.empty()) {
      reason = "missing url";
      return std::nullopt;
    }
    if (!get_string(e, "kind", text)) {
      reason = "bad kind";
      return std::nullopt;
    }
    if (auto kind = entry_kind_from_string(text)) {
      entry.kind = *kind;
    } else {
      reason = "bad kind";
      return std::nullopt;
    }
    bool bad = false;
    get_optional_string(e, "link_text", entry.link_text, bad);
    get_optional_string(e, "age_string", entry.age_string, bad);
    get_optional_string(e, "medium", entry.medium, bad);
    get_optional_string(e, "title", entry.title, bad);
    if (bad) {
      reason = "bad optional entry field";
      return std::nullopt;
    }
    if (entry.age_string && entry.kind == EntryKind::organic) {
      reason = "age_string on organic entry";
      return std::nullopt;
    }
    r.entries.push_back(std::move(entry));
  }
  return r;
}

ParseResult parse_records(std::string_view text, const std::string& source_name) {
  ParseResult result;
  result.dataset.provenance.sources.push_back(source_name);
  std::size_t line_number = 0;
  std::size_t pos = 0;
  std::string reason;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line =
        nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!util::trim(line).empty()) {
      if (auto record = parse_record_line(line, reason)) {
        result.dataset.records.push_back(std::move(*record));
      } else {
        result.rejects.push_back({line_number, reason});
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return result;
}

ParseResult load_records_file(const std::string& path) {
  ParseResult result;
  result.dataset.provenance.sources.push_back(path);
  LineSource source(path);
  std::string line;
  std::string reason;
  std::size_t line_number = 0;
  while (source.next(line)) {
    ++line_number;
    if (util::trim(line).empty()) continue;
    if (auto record = parse_record_line(line, reason)) {
      result.dataset.records.push_back(std::move(*record));
    } else {
      result.rejects.push_back({line_number, reason});
    }
  }
  return result;
}

std::string serialize_record(const DonationRecord& r) {
  std::string out;
  out.reserve(256 + r.entries.size() * 96);
  out += "{\"donor_id\":";
  append_json_string(out, r.donor_id);
  out += ",\"search_type\":\"";
  out += to_string(r.search_type);
  out += "\",\"term\":";
  append_json_string(out, r.term.text());
  out += ",\"timestamp\":";
  append_json_string(out, format_timestamp(r.timestamp));
  out += ",\"logged_in\":";
  out += r.logged_in ? "true" : "false";
  out += ",\"browser_language\":";
  append_json_string(out, r.browser_language);
  out += ",\"lat\":";
  append_double(out, r.geo.lat);
  out += ",\"lon\":";
  append_double(out, r.geo.lon);
  out += ",\"country\":";
  append_json_string(out, r.geo.country);
  out += ",\"entries\":[";
  bool first = true;
  for (const auto& e : r.entries) {
    if (!first) out.push_back(',');
    first = false;
    out += "{\"rank\":";
    append_int(out, e.rank);
    out += ",\"kind\":\"";
    out += to_string(e.kind);
    out += "\",\"url\":";
    append_json_string(out, e.url);
    if (e.link_text) {
      out += ",\"link_text\":";
      append_json_string(out, *e.link_text);
    }
    if (e.age_string) {
      out += ",\"age_string\":";
      append_json_string(out, *e.age_string);
    }
    if (e.medium) {
      out += ",\"medium\":";
      append_json_string(out, *e.medium);
    }
    if (e.title) {
      out += ",\"title\":";
      append_json_string(out, *e.title);
    }
    out.push_back('}');
  }
  out += "]}";
  return out;
}

std::string serialize_records(const Dataset& dataset) {
  std::string out;
  for (const auto& r : dataset.records) {
    out += serialize_record(r);
    out.push_back('\n');
  }
  return out;
}

LineSource::LineSource(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open input file: " + path);
  gzbuffer(f, 1 << 17);
  gz_ = f;
}

LineSource::~LineSource() {
  if (gz_) gzclose(static_cast<gzFile>(gz_));
}

bool LineSource::next(std::string& line) {
  gzFile f = static_cast<gzFile>(gz_);
  line.clear();
  char buf[1 << 16];
  while (true) {
    if (gzgets(f, buf, sizeof(buf)) == nullptr) {
      int errnum = 0;
      const char* msg = gzerror(f, &errnum);
      if (errnum != Z_OK && errnum != Z_STREAM_END) {
        throw std::runtime_error(std::string("gzip read error: ") + (msg ? msg : ""));
      }
      return !line.empty();
    }
    line.append(buf);
    if (!line.empty() && line.back() == '\n') {
      line.pop_back();
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    }
  }
}

LineSink::LineSink(const std::string& path) {
  if (util::ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    gzbuffer(f, 1 << 17);
    gz_ = f;
  } else {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    plain_ = f;
  }
}

LineSink::~LineSink() {
  try {
    close();
  } catch (...) {
  }
}

void LineSink::write(std::string_view line) {
  if (gz_) {
    gzFile f = static_cast<gzFile>(gz_);
    if (!line.empty() &&
        gzwrite(f, line.data(), static_cast<unsigned>(line.size())) !=
            static_cast<int>(line.size())) {
      throw std::runtime_error("gzip write error");
    }
    if (gzwrite(f, "\n", 1) != 1) throw std::runtime_error("gzip write error");
  } else if (plain_) {
    FILE* f = static_cast<FILE*>(plain_);
    if (std::fwrite(line.data(), 1, line.size(), f) != line.size() && !line.empty()) {
      throw std::runtime_error("write error");
    }
    if (std::fputc('\n', f) == EOF) throw std::runtime_error("write error");
  } else {
    throw std::logic_error("write on closed LineSink");
  }
}

void LineSink::close() {
  if (gz_) {
    gzFile f = static_cast<gzFile>(gz_);
    gz_ = nullptr;
    if (gzclose(f) != Z_OK) throw std::runtime_error("gzip close error");
  }
  if (plain_) {
    FILE* f = static_cast<FILE*>(plain_);
    plain_ = nullptr;
    if (std::fclose(f) != 0) throw std::runtime_error("close error");
  }
}

DatasetSummary summarize(const Dataset& dataset) {
  DatasetSummary s;
  s.total_records = dataset.records.size();
  std::map<Date, std::map<std::string, std::pair<std::size_t, std::size_t>>> day_donor_logins;
  std::map<std::string, std::set<std::string>> country_donors;
  std::vector<std::size_t> term_counts(SearchTerm::count, 0);
  for (const auto& r : dataset.records) {
    if (r.search_type == SearchType::google_search) {
      ++s.records_google_search;
    } else {
      ++s.records_google_news;
    }
    auto& login = day_donor_logins[r.timestamp.date][r.donor_id];
    if (r.logged_in) {
      ++login.first;
    } else {
      ++login.second;
    }
    country_donors[r.geo.country].insert(r.donor_id);
    ++term_counts[static_cast<std::size_t>(r.term.index())];
  }
  for (const auto& [date, donors] : day_donor_logins) {
    DailyDonorCount day{date, 0, 0};
    for (const auto& [donor, login] : donors) {
      if (login.first > login.second) {
        ++day.logged_in;
      } else {
        ++day.logged_out;
      }
    }
    s.per_day.push_back(day);
  }
  for (auto& [country, donors] : country_donors) {
    s.donors_per_country.emplace_back(country, donors.size());
  }
  for (const auto& term : SearchTerm::all()) {
    s.records_per_term.emplace_back(term.text(),
                                    term_counts[static_cast<std::size_t>(term.index())]);
  }
  return s;
}

std::vector<LocationRow> export_locations(const Dataset& dataset,
                                          const std::set<std::string>* retained_donors) {
  struct Bucket {
    std::set<std::string> donors;
    bool retained = false;
  };
  std::map<std::tuple<long, long, std::string>, Bucket> buckets;
  for (const auto& r : dataset.records) {
    long lat_cents = std::lround(r.geo.lat * 100.0);
    long lon_cents = std::lround(r.geo.lon * 100.0);
    auto& bucket = buckets[{lat_cents, lon_cents, r.geo.country}];
    bucket.donors.insert(r.donor_id);
    if (!retained_donors || retained_donors->count(r.donor_id)) bucket.retained = true;
  }
  std::vector<LocationRow> rows;
  rows.reserve(buckets.size());
  for (const auto& [key, bucket] : buckets) {
    LocationRow row;
    row.lat = static_cast<double>(std::get<0>(key)) / 100.0;
    row.lon = static_cast<double>(std::get<1>(key)) / 100.0;
    row.country = std::get<2>(key);
    row.donor_count = bucket.donors.size();
    row.retained = bucket.retained;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace serpaudit
