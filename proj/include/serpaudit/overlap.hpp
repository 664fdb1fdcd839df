#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "serpaudit/model.hpp"

namespace serpaudit {

// All donors' lists at one (term, time_key): at most one list per donor
// (earliest upload wins), members sorted by donor_id.
struct PairGroup {
  SearchTerm term = SearchTerm::from_index(0);
  SearchTimeKey time_key = SearchTimeKey::from_index(0);
  SearchType search_type = SearchType::google_search;
  bool with_top_stories = false;
  std::vector<const ResultList*> members;
};

// Groups ordered by (term, time_key). The pointers alias `lists`.
std::vector<PairGroup> build_groups(std::span<const ResultList> lists, SearchType search_type,
                                    bool use_top_stories = false);

// The URL sequence a member contributes: top stories first when enabled,
// then organic entries.
std::vector<std::string_view> member_urls(const PairGroup& group, std::size_t member);

// Aggregates carry exact integer sums so merged / multi-threaded runs are
// bitwise reproducible; means and percentages are derived on demand.
struct OverlapStats {
  std::size_t n_lists = 0;
  std::uint64_t n_pairs = 0;
  std::uint64_t identical_pairs = 0;
  std::uint64_t identical_ordered_pairs = 0;
  std::uint64_t sum_common_links = 0;  // over pairs, URL-set intersections
  std::uint64_t sum_list_length = 0;   // over lists, URL-set sizes
  std::vector<std::uint64_t> histogram;  // pairs per common-link count

  double identical_fraction() const;          // percent
  double identical_ordered_fraction() const;  // percent
  double mean_common_links() const;
  double mean_list_length() const;
  double scope() const;  // mean_list_length - mean_common_links

  void merge(const OverlapStats& other);
};

// nullopt when the group has fewer than two lists (statistics undefined).
std::optional<OverlapStats> group_stats(const PairGroup& group);

std::optional<double> identical_fraction(const PairGroup& group, bool ordered);
std::optional<double> mean_common_links(const PairGroup& group);
std::optional<double> scope_for_personalization(const PairGroup& group);
std::vector<std::uint64_t> common_links_histogram(const PairGroup& group);

struct TermOverlap {
  SearchTerm term = SearchTerm::from_index(0);
  OverlapStats pooled;  // pairs pooled across keys (pairs only form within a key)
  std::vector<std::pair<SearchTimeKey, OverlapStats>> per_key;
};

// Ordered by term; only groups with >= 2 lists contribute.
std::vector<TermOverlap> per_term_stats(std::span<const PairGroup> groups, int threads = 1);

// google_news variant: same statistics over news lists.
std::vector<TermOverlap> news_overlap(std::span<const ResultList> lists, int threads = 1);

}  // namespace serpaudit
