#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "serpaudit/catalog.hpp"
#include "serpaudit/model.hpp"

namespace serpaudit {

struct TimeSeriesPoint {
  SearchTimeKey key = SearchTimeKey::from_index(0);
  double value = 0.0;
};

// Keys strictly increasing; keys without observations are omitted.
struct TimeSeries {
  std::string label;
  std::vector<TimeSeriesPoint> points;
};

// Fraction of google_search lists carrying at least one top story, per key.
// Without a term the aggregate over all terms is returned.
TimeSeries topstory_share(std::span<const ResultList> lists,
                          std::optional<SearchTerm> term = std::nullopt);

// Distinct TLDs delivered (organic + top stories) to any donor at each key.
TimeSeries distinct_tld_count(std::span<const ResultList> lists, SearchTerm term);

struct EditableSeries {
  TimeSeries series;
  double grand_mean = 0.0;  // mean of the per-key values
};

// Per-key pooled editable fraction over all URLs delivered at that key.
EditableSeries editable_share_series(std::span<const ResultList> lists, SearchTerm term,
                                     const CategoryTable& table,
                                     bool include_top_stories = true);

}  // namespace serpaudit
