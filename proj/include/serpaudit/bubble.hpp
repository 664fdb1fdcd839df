#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "serpaudit/model.hpp"
#include "serpaudit/overlap.hpp"

namespace serpaudit {

struct ResidualList {
  const ResultList* original = nullptr;
  // Original order, duplicates collapsed, popular URLs removed.
  std::vector<std::string_view> residual;
};

// Removes a URL from every list iff it appears in >= threshold of the
// group's lists.
std::vector<ResidualList> popularity_filter(const PairGroup& group, double threshold = 0.70);

// Member index sets, each of size >= 2, ordered by smallest member index.
// Default: connected components of the graph with an edge where two residual
// lists share >= min_shared URLs. clique_mode instead grows disjoint maximal
// cliques greedily from the lowest unassigned index.
std::vector<std::vector<std::size_t>> cluster_residuals(
    const std::vector<ResidualList>& residuals, int min_shared = 3, bool clique_mode = false);

// Mean original-list common links between cluster members and all outsiders
// of the group; nullopt when the cluster covers the whole group.
std::optional<double> distinctness(const std::vector<std::size_t>& cluster,
                                   const PairGroup& group);

struct Cluster {
  std::vector<std::string> member_donor_ids;  // sorted
  double mean_internal_shared = 0.0;          // residual links, internal pairs
  std::optional<double> distinctness;
  bool flagged = false;  // distinctness defined and below the threshold
};

struct DetectParams {
  double popularity_threshold = 0.70;
  int min_shared = 3;
  double distinctness_threshold = 3.5;
  bool clique_mode = false;
};

struct ClusterReport {
  SearchTerm term = SearchTerm::from_index(0);
  SearchTimeKey time_key = SearchTimeKey::from_index(0);
  DetectParams params;
  std::vector<Cluster> clusters;
};

ClusterReport detect_group(const PairGroup& group, const DetectParams& params = {});

inline constexpr std::string_view kUnknownLocale = "unknown";

// Ordered (tag, pattern) rows; the first pattern matching an age string
// decides the locale. Patterns are case-insensitive ECMAScript regexes
// matched anywhere in the string.
class LocalePatternTable {
 public:
  LocalePatternTable();
  ~LocalePatternTable();
  LocalePatternTable(LocalePatternTable&&) noexcept;
  LocalePatternTable& operator=(LocalePatternTable&&) noexcept;

  // de / en / fr / no relative-time phrases.
  static LocalePatternTable defaults();
  static LocalePatternTable from_file(const std::string& path);
  static LocalePatternTable from_text(std::string_view text);

  void add(std::string tag, const std::string& pattern);
  std::string match(std::string_view age_string) const;  // kUnknownLocale if none
  const std::vector<std::string>& tags() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Locale of the first age string that matches any pattern.
std::string detect_locale(const ResultList& list, const LocalePatternTable& table);

// Majority locale per donor over the given lists; ties take the
// lexicographically smallest tag, donors with no matched age string are
// "unknown".
std::map<std::string, std::string> donor_locales(std::span<const ResultList> lists,
                                                 const LocalePatternTable& table);

struct LocaleMatrix {
  std::vector<std::string> donor_ids;  // sorted by (locale, donor_id)
  std::vector<std::string> locales;    // parallel to donor_ids
  std::vector<std::vector<std::uint32_t>> counts;  // symmetric; diagonal = own size
};

LocaleMatrix locale_overlap_matrix(const PairGroup& group,
                                   const std::map<std::string, std::string>& donor_locale);

}  // namespace serpaudit
