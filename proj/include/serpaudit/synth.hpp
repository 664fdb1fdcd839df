#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "serpaudit/catalog.hpp"
#include "serpaudit/cleanse.hpp"
#include "serpaudit/model.hpp"
#include "serpaudit/reach.hpp"
#include "serpaudit/region.hpp"

namespace serpaudit {

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RegionalSpec {
  int n_regions = 0;
  int branch_urls_per_region = 0;
  int donors_per_region = 0;

  bool enabled() const { return n_regions > 0; }
};

struct LocaleSpec {
  std::string tag = "de";
  double fraction = 1.0;
  int shared_urls_per_list = 0;    // same URLs for every donor of the locale
  int personal_urls_per_list = 0;  // drawn per donor
};

struct FaultRates {
  double duplicate_id = 0.0;
  double repeated_url_list = 0.0;
  double oversize_list = 0.0;
  double redirect_stub = 0.0;
};

// Category layout of the base list; must sum to base_list_length. The first
// owned slot is always the term's main site.
struct BaseComposition {
  int owned = 3;
  int social = 1;
  int wikipedia = 1;
  int media = 4;

  int total() const { return owned + social + wikipedia + media; }
};

struct ReachPanelSpec {
  bool enabled = false;
  double a = 1.373;
  double b = 0.9;
  double relative_noise = 0.1;
};

struct CohortSpec {
  int n_donors = 0;
  std::vector<SearchTerm> terms;    // resolved; never empty after validate
  std::vector<SearchTimeKey> keys;  // resolved; never empty after validate
  int base_list_length = 9;
  int personalization_swaps = 0;
  int personalization_pool = 5000;
  BaseComposition base_composition;
  RegionalSpec regional;
  std::vector<LocaleSpec> locale_mix;  // empty = single "de"
  double top_story_prob = 0.9;
  FaultRates fault_rates;
  std::uint64_t seed = 1;
  bool include_news = false;
  int news_list_length = 20;
  double logged_in_fraction = 0.3;
  ReachPanelSpec reach_panel;
  DateWindow reach_window;
};

void validate(const CohortSpec& spec);  // throws SpecError
CohortSpec cohort_spec_from_json(const std::string& text);
std::string cohort_spec_to_json(const CohortSpec& spec);

struct FaultLabel {
  std::string donor_id;
  int term_index = 0;
  SearchType search_type = SearchType::google_search;
  std::string timestamp;
  std::string fault_class;  // duplicate_id | repeated_url_list | oversize_list | redirect_stub
  std::string disposition;  // removed | truncated | entries_dropped
};

struct ForeignClusterTruth {
  std::string locale;
  std::vector<std::string> members;
  int residual_shared = 0;
  double expected_outward = 0.0;
};

struct GroundTruth {
  std::map<std::string, int> donor_region;
  std::map<std::string, std::string> donor_locale;
  std::vector<std::string> duplicate_donor_ids;
  std::vector<FaultLabel> fault_labels;
  double expected_mean_list_length = 0.0;
  double expected_scope = 0.0;
  double expected_raw_nonshared = 0.0;
  double expected_refined_nonshared = 0.0;
  std::optional<double> expected_news_scope;
  // Closed forms hold only when every donor shares one locale.
  bool scope_formula_valid = false;
  std::vector<ForeignClusterTruth> foreign_clusters;
  std::vector<std::string> regional_places;
  std::optional<ReachPanelSpec> reach_model;
};

std::string ground_truth_to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const std::string& text);

struct GenerateResult {
  std::size_t records_emitted = 0;
  std::size_t search_records = 0;
  std::size_t news_records = 0;
  GroundTruth truth;
  LanguageTable language_table;
  CategoryTable category_table;
  std::vector<std::string> gazetteer_places;
  std::vector<std::pair<std::string, double>> reach_panel_rows;  // (tld, active reach)
};

// Deterministic for a fixed seed: every random choice comes from a stream
// keyed by (seed, role, donor/term/key), so records are independent of
// emission order.
GenerateResult generate(const CohortSpec& spec,
                        const std::function<void(const DonationRecord&)>& emit);

// Writes records.jsonl.gz plus sidecars (ground_truth.json, language_table.tsv,
// category_table.tsv, gazetteer.txt, reach_panel.tsv, cohort_config.json).
GenerateResult generate_files(const CohortSpec& spec, const std::string& out_dir);

struct OracleCheck {
  std::string name;
  double expected = 0.0;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

struct OracleReport {
  std::vector<OracleCheck> checks;

  bool all_pass() const;
  std::string to_text() const;
};

// Compares pipeline outputs on a generated corpus against the ground truth:
// closed-form scope (search and news), regional raw/refined non-shared
// counts, planted cluster recovery, fault dispositions, locale tags, and the
// recovered reach power law.
OracleReport oracle_report(const CohortSpec& spec, const GroundTruth& truth,
                           std::size_t emitted_search_records,
                           std::span<const ResultList> cleaned_lists,
                           const RegionalTagTable* regional_table, const ReachFit* reach_fit,
                           int threads = 1);

}  // namespace serpaudit
