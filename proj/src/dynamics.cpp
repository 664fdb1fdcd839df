#include "serpaudit/dynamics.hpp"

#include <array>
#include <set>

namespace serpaudit {
namespace {

template <typename Fn>
void for_each_by_key(std::span<const ResultList> lists, std::optional<SearchTerm> term,
                     Fn&& fn) {
  std::array<std::vector<const ResultList*>, SearchTimeKey::count> buckets;
  for (const auto& list : lists) {
    if (list.search_type != SearchType::google_search) continue;
    if (term && list.term != *term) continue;
    buckets[static_cast<std::size_t>(list.time_key.index())].push_back(&list);
  }
  for (int k = 0; k < SearchTimeKey::count; ++k) {
    const auto& bucket = buckets[static_cast<std::size_t>(k)];
    if (!bucket.empty()) fn(SearchTimeKey::from_index(k), bucket);
  }
}

}  // namespace

TimeSeries topstory_share(std::span<const ResultList> lists, std::optional<SearchTerm> term) {
  TimeSeries series;
  series.label = term ? "topstory_share:" + term->slug() : "topstory_share:all";
  for_each_by_key(lists, term,
                  [&](SearchTimeKey key, const std::vector<const ResultList*>& bucket) {
                    std::size_t with_top = 0;
                    for (const auto* list : bucket) {
                      if (!list->top_stories.empty()) ++with_top;
                    }
                    series.points.push_back(
                        {key, static_cast<double>(with_top) / static_cast<double>(bucket.size())});
                  });
  return series;
}

TimeSeries distinct_tld_count(std::span<const ResultList> lists, SearchTerm term) {
  TimeSeries series;
  series.label = "distinct_tlds:" + term.slug();
  for_each_by_key(lists, term,
                  [&](SearchTimeKey key, const std::vector<const ResultList*>& bucket) {
                    std::set<std::string> tlds;
                    for (const auto* list : bucket) {
                      for (const auto& url : list->organic) {
                        if (auto tld = try_extract_tld(url)) tlds.insert(std::move(tld->value));
                      }
                      for (const auto& url : list->top_stories) {
                        if (auto tld = try_extract_tld(url)) tlds.insert(std::move(tld->value));
                      }
                    }
                    series.points.push_back({key, static_cast<double>(tlds.size())});
                  });
  return series;
}

EditableSeries editable_share_series(std::span<const ResultList> lists, SearchTerm term,
                                     const CategoryTable& table, bool include_top_stories) {
  EditableSeries result;
  result.series.label = "editable_share:" + term.slug();
  double value_sum = 0.0;
  for_each_by_key(lists, term,
                  [&](SearchTimeKey key, const std::vector<const ResultList*>& bucket) {
                    std::uint64_t editable = 0;
                    std::uint64_t total = 0;
                    auto tally = [&](const std::vector<std::string>& urls) {
                      for (const auto& url : urls) {
                        ++total;
                        auto tld = try_extract_tld(url);
                        if (tld && is_editable(table.classify(*tld).main)) ++editable;
                      }
                    };
                    for (const auto* list : bucket) {
                      tally(list->organic);
                      if (include_top_stories) tally(list->top_stories);
                    }
                    if (total == 0) return;
                    double value = static_cast<double>(editable) / static_cast<double>(total);
                    result.series.points.push_back({key, value});
                    value_sum += value;
                  });
  if (!result.series.points.empty()) {
    result.grand_mean = value_sum / static_cast<double>(result.series.points.size());
  }
  return result;
}

}  // namespace serpaudit
