#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "serpaudit/ingest.hpp"
#include "serpaudit/model.hpp"

namespace serpaudit {

// tld -> language tag; unmapped hosts are "unknown".
class LanguageTable {
 public:
  static LanguageTable from_file(const std::string& path);
  static LanguageTable from_text(std::string_view text);

  void set(std::string tld, std::string tag);
  const std::string& tag_for(const Tld& tld) const;
  std::size_t size() const { return map_.size(); }
  std::string to_text() const;

 private:
  std::map<std::string, std::string> map_;
};

struct CleanseConfig {
  std::set<std::string> donor_blocklist;
  bool duplicate_id_heuristic = true;
  double language_share_threshold = 0.5;
};

struct StageReport {
  std::string stage;
  std::size_t records_in = 0;
  std::size_t records_removed = 0;
};

struct CleaningReport {
  std::vector<StageReport> stages;
  std::size_t search_records_in = 0;
  std::size_t search_records_out = 0;
  std::size_t news_records_in = 0;
  std::size_t news_records_out = 0;
  double reduction_google_search = 0.0;
  double reduction_google_news = 0.0;
  std::vector<std::string> dropped_donor_ids;  // donors with zero surviving records
};

struct CleanseResult {
  std::vector<ResultList> lists;
  CleaningReport report;
};

struct CleanseRecordsResult {
  Dataset dataset;  // surviving records, truncated / stub-stripped in place
  CleaningReport report;
};

// Stage 1: removes every record of blocklisted donors and (heuristically) of
// donors appearing with more than one country or browser language inside a
// single SearchTimeKey. Returns the removed record count.
std::size_t drop_duplicate_id_donors(Dataset& dataset, const CleanseConfig& config);

// Stage 2: organic entries cut to the first 10 (google_search), news entries
// to the first 20, top stories to 3; ranks reassigned. True if anything
// was cut.
bool truncate_record(DonationRecord& record);

bool is_stub_url(std::string_view url);
// Removes redirect-stub entries and reranks. Returns removed count.
std::size_t remove_stub_entries(DonationRecord& record);
// Stage 3 per-record decision: false drops the record. Mutates (stub removal).
bool apply_degenerate_stage(DonationRecord& record);

// German share among known-language entries; nullopt when no entry maps to a
// known language.
std::optional<double> language_share(const DonationRecord& record, const LanguageTable& table);
// Stage 4 decision: keep iff share strictly above the threshold.
bool language_keep(const DonationRecord& record, const LanguageTable& table, double threshold);

// Stage 5: keeps records whose timestamp falls in an admissible key window.
std::size_t restrict_period(Dataset& dataset);

// Runs all stages in the fixed order, keeping the surviving records.
CleanseRecordsResult run_pipeline_records(Dataset dataset, const CleanseConfig& config,
                                          const LanguageTable& table);

// Runs all stages in the fixed order and converts survivors to ResultLists
// (URLs deduplicated, first occurrence kept).
CleanseResult run_pipeline(Dataset dataset, const CleanseConfig& config,
                           const LanguageTable& table);

ResultList to_result_list(const DonationRecord& record, SearchTimeKey key);

// Streams a .jsonl/.jsonl.gz record file straight into ResultLists without
// materializing the dataset; records outside the admissible period are
// skipped. Malformed lines are appended to `rejects` when given.
std::vector<ResultList> load_result_lists(const std::string& path,
                                          std::vector<ParseReject>* rejects = nullptr);

}  // namespace serpaudit
