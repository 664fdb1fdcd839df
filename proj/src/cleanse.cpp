#include "serpaudit/cleanse.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "serpaudit/util.hpp"

namespace serpaudit {
namespace {

const std::string kUnknown = "unknown";
const std::string kGerman = "de";

bool is_main_entry(const DonationRecord& record, const ResultEntry& entry) {
  return record.search_type == SearchType::google_search ? entry.kind == EntryKind::organic
                                                         : entry.kind == EntryKind::news;
}

void rerank(DonationRecord& record) {
  int rank = 1;
  for (auto& entry : record.entries) entry.rank = rank++;
}

}  // namespace

LanguageTable LanguageTable::from_file(const std::string& path) {
  return from_text(util::read_text_file(path));
}

LanguageTable LanguageTable::from_text(std::string_view text) {
  LanguageTable table;
  for (const auto& raw : util::split(text, '\n')) {
    std::string_view line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto hash = line.find('#');
    if (hash != std::string_view::npos) line = util::trim(line.substr(0, hash));
    std::string tld;
    std::string tag;
    std::size_t i = 0;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
      tld.push_back(line[i++]);
    }
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
      tag.push_back(line[i++]);
    }
    if (tld.empty() || tag.empty()) {
      throw std::runtime_error("bad language table line: " + std::string(raw));
    }
    table.set(std::move(tld), std::move(tag));
  }
  return table;
}

void LanguageTable::set(std::string tld, std::string tag) {
  map_[util::to_lower(tld)] = std::move(tag);
}

const std::string& LanguageTable::tag_for(const Tld& tld) const {
  auto it = map_.find(tld.value);
  return it == map_.end() ? kUnknown : it->second;
}

std::string LanguageTable::to_text() const {
  std::string out;
  for (const auto& [tld, tag] : map_) {
    out += tld;
    out.push_back('\t');
    out += tag;
    out.push_back('\n');
  }
  return out;
}

std::size_t drop_duplicate_id_donors(Dataset& dataset, const CleanseConfig& config) {
  std::set<std::string> flagged = config.donor_blocklist;
  if (config.duplicate_id_heuristic) {
    // donor -> key index -> (countries, languages) seen in that key
    std::map<std::string, std::map<int, std::pair<std::set<std::string>, std::set<std::string>>>>
        seen;
    for (const auto& r : dataset.records) {
      auto key = time_key_of(r.timestamp);
      if (!key) continue;
      auto& sets = seen[r.donor_id][key->index()];
      sets.first.insert(r.geo.country);
      sets.second.insert(r.browser_language);
    }
    for (const auto& [donor, keys] : seen) {
      for (const auto& [key, sets] : keys) {
        if (sets.first.size() > 1 || sets.second.size() > 1) {
          flagged.insert(donor);
          break;
        }
      }
    }
  }
  std::size_t before = dataset.records.size();
  std::erase_if(dataset.records,
                [&](const DonationRecord& r) { return flagged.count(r.donor_id) > 0; });
  return before - dataset.records.size();
}

bool truncate_record(DonationRecord& record) {
  std::size_t organic_limit = record.search_type == SearchType::google_search ? 10 : 0;
  std::size_t news_limit = record.search_type == SearchType::google_news ? 20 : 0;
  std::size_t top_limit = 3;
  std::size_t organic_seen = 0;
  std::size_t news_seen = 0;
  std::size_t top_seen = 0;
  std::size_t before = record.entries.size();
  std::erase_if(record.entries, [&](const ResultEntry& e) {
    switch (e.kind) {
      case EntryKind::organic: return ++organic_seen > organic_limit;
      case EntryKind::news: return ++news_seen > news_limit;
      case EntryKind::top_story: return ++top_seen > top_limit;
    }
    return false;
  });
  if (record.entries.size() != before) {
    rerank(record);
    return true;
  }
  return false;
}

bool is_stub_url(std::string_view url) {
  std::string_view trimmed = util::trim(url);
  return trimmed == "google" || trimmed.find("google.de/url") != std::string_view::npos;
}

std::size_t remove_stub_entries(DonationRecord& record) {
  std::size_t before = record.entries.size();
  std::erase_if(record.entries, [](const ResultEntry& e) { return is_stub_url(e.url); });
  std::size_t removed = before - record.entries.size();
  if (removed > 0) rerank(record);
  return removed;
}

bool apply_degenerate_stage(DonationRecord& record) {
  const std::string* first_url = nullptr;
  std::size_t main_count = 0;
  bool all_identical = true;
  for (const auto& e : record.entries) {
    if (!is_main_entry(record, e)) continue;
    ++main_count;
    if (!first_url) {
      first_url = &e.url;
    } else if (e.url != *first_url) {
      all_identical = false;
    }
  }
  if (main_count >= 2 && all_identical) return false;
  remove_stub_entries(record);
  std::size_t remaining = 0;
  for (const auto& e : record.entries) {
    if (is_main_entry(record, e)) ++remaining;
  }
  return remaining > 0;
}

std::optional<double> language_share(const DonationRecord& record, const LanguageTable& table) {
  std::size_t known = 0;
  std::size_t german = 0;
  for (const auto& e : record.entries) {
    auto tld = try_extract_tld(e.url);
    if (!tld) continue;
    const std::string& tag = table.tag_for(*tld);
    if (tag == kUnknown) continue;
    ++known;
    if (tag == kGerman) ++german;
  }
  if (known == 0) return std::nullopt;
  return static_cast<double>(german) / static_cast<double>(known);
}

bool language_keep(const DonationRecord& record, const LanguageTable& table, double threshold) {
  auto share = language_share(record, table);
  return share.has_value() && *share > threshold;
}

std::size_t restrict_period(Dataset& dataset) {
  std::size_t before = dataset.records.size();
  std::erase_if(dataset.records,
                [](const DonationRecord& r) { return !time_key_of(r.timestamp).has_value(); });
  return before - dataset.records.size();
}

ResultList to_result_list(const DonationRecord& record, SearchTimeKey key) {
  ResultList list;
  list.donor_id = record.donor_id;
  list.term = record.term;
  list.time_key = key;
  list.search_type = record.search_type;
  list.timestamp = record.timestamp;
  std::set<std::string_view> seen_top;
  std::set<std::string_view> seen_main;
  for (const auto& e : record.entries) {
    if (e.kind == EntryKind::top_story) {
      if (seen_top.insert(e.url).second) {
        list.top_stories.push_back(e.url);
        list.top_story_age_strings.push_back(e.age_string.value_or(""));
      }
    } else if (is_main_entry(record, e)) {
      if (seen_main.insert(e.url).second) list.organic.push_back(e.url);
    }
  }
  return list;
}

CleanseRecordsResult run_pipeline_records(Dataset dataset, const CleanseConfig& config,
                                          const LanguageTable& table) {
  CleanseRecordsResult result;
  CleaningReport& report = result.report;
  std::set<std::string> donors_in;
  for (const auto& r : dataset.records) {
    donors_in.insert(r.donor_id);
    if (r.search_type == SearchType::google_search) {
      ++report.search_records_in;
    } else {
      ++report.news_records_in;
    }
  }

  std::size_t in = dataset.records.size();
  std::size_t removed = drop_duplicate_id_donors(dataset, config);
  report.stages.push_back({"duplicate_ids", in, removed});

  in = dataset.records.size();
  for (auto& r : dataset.records) truncate_record(r);
  report.stages.push_back({"truncate", in, 0});

  in = dataset.records.size();
  std::erase_if(dataset.records, [](DonationRecord& r) { return !apply_degenerate_stage(r); });
  report.stages.push_back({"degenerate", in, in - dataset.records.size()});

  in = dataset.records.size();
  std::erase_if(dataset.records, [&](const DonationRecord& r) {
    return !language_keep(r, table, config.language_share_threshold);
  });
  report.stages.push_back({"language", in, in - dataset.records.size()});

  in = dataset.records.size();
  removed = restrict_period(dataset);
  report.stages.push_back({"period", in, removed});

  std::set<std::string> donors_out;
  for (const auto& r : dataset.records) {
    donors_out.insert(r.donor_id);
    if (r.search_type == SearchType::google_search) {
      ++report.search_records_out;
    } else {
      ++report.news_records_out;
    }
  }
  report.reduction_google_search =
      report.search_records_in == 0
          ? 0.0
          : 1.0 - static_cast<double>(report.search_records_out) /
                      static_cast<double>(report.search_records_in);
  report.reduction_google_news =
      report.news_records_in == 0
          ? 0.0
          : 1.0 - static_cast<double>(report.news_records_out) /
                      static_cast<double>(report.news_records_in);
  for (const auto& donor : donors_in) {
    if (!donors_out.count(donor)) report.dropped_donor_ids.push_back(donor);
  }
  result.dataset = std::move(dataset);
  return result;
}

CleanseResult run_pipeline(Dataset dataset, const CleanseConfig& config,
                           const LanguageTable& table) {
  CleanseRecordsResult records = run_pipeline_records(std::move(dataset), config, table);
  CleanseResult result;
  result.report = std::move(records.report);
  result.lists.reserve(records.dataset.records.size());
  for (const auto& r : records.dataset.records) {
    auto key = time_key_of(r.timestamp);
    result.lists.push_back(to_result_list(r, *key));
  }
  return result;
}

std::vector<ResultList> load_result_lists(const std::string& path,
                                          std::vector<ParseReject>* rejects) {
  LineSource source(path);
  std::vector<ResultList> lists;
  std::string line, reason;
  std::size_t line_number = 0;
  while (source.next(line)) {
    ++line_number;
    if (line.empty()) continue;
    auto record = parse_record_line(line, reason);
    if (!record) {
      if (rejects) rejects->push_back({line_number, reason});
      continue;
    }
    if (auto key = time_key_of(record->timestamp)) lists.push_back(to_result_list(*record, *key));
  }
  return lists;
}

}  // namespace serpaudit
