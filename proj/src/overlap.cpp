#include "serpaudit/overlap.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>

#include "serpaudit/util.hpp"

namespace serpaudit {
namespace {

// Earliest upload wins; full-content tie-break keeps the choice independent
// of input order.
bool earlier(const ResultList& a, const ResultList& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  if (a.organic != b.organic) return a.organic < b.organic;
  return a.top_stories < b.top_stories;
}

std::uint32_t intersect_count(const std::uint32_t* a, const std::uint32_t* a_end,
                              const std::uint32_t* b, const std::uint32_t* b_end) {
  std::uint32_t count = 0;
  while (a != a_end && b != b_end) {
    if (*a < *b) {
      ++a;
    } else if (*b < *a) {
      ++b;
    } else {
      ++count;
      ++a;
      ++b;
    }
  }
  return count;
}

}  // namespace

std::vector<PairGroup> build_groups(std::span<const ResultList> lists, SearchType search_type,
                                    bool use_top_stories) {
  std::map<std::pair<int, int>, std::map<std::string_view, const ResultList*>> grouped;
  for (const auto& list : lists) {
    if (list.search_type != search_type) continue;
    const ResultList*& slot =
        grouped[{list.term.index(), list.time_key.index()}][list.donor_id];
    if (slot == nullptr || earlier(list, *slot)) slot = &list;
  }
  std::vector<PairGroup> groups;
  groups.reserve(grouped.size());
  for (const auto& [key, members] : grouped) {
    PairGroup group;
    group.term = SearchTerm::from_index(key.first);
    group.time_key = SearchTimeKey::from_index(key.second);
    group.search_type = search_type;
    group.with_top_stories = use_top_stories;
    group.members.reserve(members.size());
    for (const auto& [donor, list] : members) group.members.push_back(list);
    groups.push_back(std::move(group));
  }
  return groups;
}

std::vector<std::string_view> member_urls(const PairGroup& group, std::size_t member) {
  const ResultList& list = *group.members[member];
  std::vector<std::string_view> urls;
  urls.reserve((group.with_top_stories ? list.top_stories.size() : 0) + list.organic.size());
  if (group.with_top_stories) {
    for (const auto& url : list.top_stories) urls.emplace_back(url);
  }
  for (const auto& url : list.organic) urls.emplace_back(url);
  return urls;
}

double OverlapStats::identical_fraction() const {
  return n_pairs == 0 ? 0.0
                      : 100.0 * static_cast<double>(identical_pairs) /
                            static_cast<double>(n_pairs);
}

double OverlapStats::identical_ordered_fraction() const {
  return n_pairs == 0 ? 0.0
                      : 100.0 * static_cast<double>(identical_ordered_pairs) /
                            static_cast<double>(n_pairs);
}

double OverlapStats::mean_common_links() const {
  return n_pairs == 0
             ? 0.0
             : static_cast<double>(sum_common_links) / static_cast<double>(n_pairs);
}

double OverlapStats::mean_list_length() const {
  return n_lists == 0
             ? 0.0
             : static_cast<double>(sum_list_length) / static_cast<double>(n_lists);
}

double OverlapStats::scope() const { return mean_list_length() - mean_common_links(); }

void OverlapStats::merge(const OverlapStats& other) {
  n_lists += other.n_lists;
  n_pairs += other.n_pairs;
  identical_pairs += other.identical_pairs;
  identical_ordered_pairs += other.identical_ordered_pairs;
  sum_common_links += other.sum_common_links;
  sum_list_length += other.sum_list_length;
  if (histogram.size() < other.histogram.size()) histogram.resize(other.histogram.size(), 0);
  for (std::size_t i = 0; i < other.histogram.size(); ++i) histogram[i] += other.histogram[i];
}

std::optional<OverlapStats> group_stats(const PairGroup& group) {
  const std::size_t n = group.members.size();
  if (n < 2) return std::nullopt;

  OverlapStats stats;
  stats.n_lists = n;
  stats.n_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;

  // Per-group interning: URL ids are local and never leave this function,
  // so assignment order cannot influence any count.
  std::unordered_map<std::string_view, std::uint32_t> ids;
  std::vector<std::vector<std::uint32_t>> raw(n);
  std::vector<std::vector<std::uint32_t>> sorted_multiset(n);
  std::vector<std::size_t> set_offset(n + 1, 0);
  std::vector<std::uint32_t> flat_sets;
  std::size_t max_set = 0;

  for (std::size_t i = 0; i < n; ++i) {
    auto urls = member_urls(group, i);
    auto& ids_raw = raw[i];
    ids_raw.reserve(urls.size());
    for (const auto& url : urls) {
      auto [it, inserted] = ids.emplace(url, static_cast<std::uint32_t>(ids.size()));
      ids_raw.push_back(it->second);
    }
    sorted_multiset[i] = ids_raw;
    std::sort(sorted_multiset[i].begin(), sorted_multiset[i].end());
    std::vector<std::uint32_t> unique_ids = sorted_multiset[i];
    unique_ids.erase(std::unique(unique_ids.begin(), unique_ids.end()), unique_ids.end());
    stats.sum_list_length += unique_ids.size();
    set_offset[i + 1] = set_offset[i] + unique_ids.size();
    flat_sets.insert(flat_sets.end(), unique_ids.begin(), unique_ids.end());
    max_set = std::max(max_set, unique_ids.size());
  }

  auto count_equal_pairs = [n](const std::vector<std::vector<std::uint32_t>>& views) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return views[a] < views[b]; });
    std::uint64_t pairs = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= n; ++i) {
      if (i < n && views[order[i]] == views[order[i - 1]]) {
        ++run;
      } else {
        pairs += static_cast<std::uint64_t>(run) * (run - 1) / 2;
        run = 1;
      }
    }
    return pairs;
  };
  stats.identical_pairs = count_equal_pairs(sorted_multiset);
  stats.identical_ordered_pairs = count_equal_pairs(raw);

  stats.histogram.assign(max_set + 1, 0);
  const std::uint32_t* base = flat_sets.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      std::uint32_t c = intersect_count(base + set_offset[i], base + set_offset[i + 1],
                                        base + set_offset[j], base + set_offset[j + 1]);
      stats.sum_common_links += c;
      ++stats.histogram[c];
    }
  }
  return stats;
}

std::optional<double> identical_fraction(const PairGroup& group, bool ordered) {
  auto stats = group_stats(group);
  if (!stats) return std::nullopt;
  return ordered ? stats->identical_ordered_fraction() : stats->identical_fraction();
}

std::optional<double> mean_common_links(const PairGroup& group) {
  auto stats = group_stats(group);
  if (!stats) return std::nullopt;
  return stats->mean_common_links();
}

std::optional<double> scope_for_personalization(const PairGroup& group) {
  auto stats = group_stats(group);
  if (!stats) return std::nullopt;
  return stats->scope();
}

std::vector<std::uint64_t> common_links_histogram(const PairGroup& group) {
  auto stats = group_stats(group);
  if (!stats) return {};
  return stats->histogram;
}

std::vector<TermOverlap> per_term_stats(std::span<const PairGroup> groups, int threads) {
  std::vector<std::optional<OverlapStats>> slots(groups.size());
  util::parallel_for(groups.size(), threads,
                     [&](std::size_t i) { slots[i] = group_stats(groups[i]); });
  std::map<int, TermOverlap> by_term;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (!slots[i]) continue;
    auto [it, inserted] = by_term.try_emplace(groups[i].term.index());
    if (inserted) it->second.term = groups[i].term;
    it->second.pooled.merge(*slots[i]);
    it->second.per_key.emplace_back(groups[i].time_key, std::move(*slots[i]));
  }
  std::vector<TermOverlap> result;
  result.reserve(by_term.size());
  for (auto& [index, term_overlap] : by_term) result.push_back(std::move(term_overlap));
  return result;
}

std::vector<TermOverlap> news_overlap(std::span<const ResultList> lists, int threads) {
  auto groups = build_groups(lists, SearchType::google_news);
  return per_term_stats(groups, threads);
}

}  // namespace serpaudit
