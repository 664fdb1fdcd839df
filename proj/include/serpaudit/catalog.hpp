#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "serpaudit/model.hpp"

namespace serpaudit {

enum class MainCategory : int {
  owned_content = 0,
  social_media = 1,
  wikipedia = 2,
  media = 3,
  freemail = 4,
  publicly_funded = 5,
  other = 6,
};
constexpr int kMainCategoryCount = 7;

enum class MediaSub : int { print = 0, tv = 1, public_service = 2, online_only = 3 };

std::string_view to_string(MainCategory c);
std::string_view to_string(MediaSub s);
std::optional<MainCategory> main_category_from_string(std::string_view s);
std::optional<MediaSub> media_sub_from_string(std::string_view s);

struct DomainCategory {
  MainCategory main = MainCategory::other;
  std::optional<MediaSub> media_sub;       // present iff main == media
  std::optional<std::string> party_owner;  // only for owned_content

  bool operator==(const DomainCategory&) const = default;
};

bool is_wikipedia_host(std::string_view host);
bool is_editable(MainCategory c);

// tld -> DomainCategory with default other; Wikipedia hosts always classify
// as wikipedia regardless of table contents.
class CategoryTable {
 public:
  static CategoryTable from_file(const std::string& path);
  static CategoryTable from_text(std::string_view text);

  void set(std::string tld, DomainCategory category);
  DomainCategory classify(const Tld& tld) const;
  std::size_t size() const { return map_.size(); }
  std::string to_text() const;

 private:
  std::map<std::string, DomainCategory> map_;
};

DomainCategory classify(const Tld& tld, const CategoryTable& table);

enum class Segment { organic, top_stories, news };

std::string_view to_string(Segment s);
std::optional<Segment> segment_from_string(std::string_view s);

// The URL vector a segment refers to, or null when the list's search type
// does not carry that segment.
const std::vector<std::string>* segment_urls(const ResultList& list, Segment segment);

struct TldCount {
  Tld tld;
  std::size_t count = 0;
};

// URL occurrences per TLD across all lists of the term/segment, ranked by
// descending count, ties lexicographic.
std::vector<TldCount> top_tlds(std::span<const ResultList> lists, SearchTerm term, std::size_t k,
                               Segment segment);

struct CategoryShares {
  std::array<double, kMainCategoryCount> main{};  // mean per-list share
  std::size_t n_lists = 0;                        // lists with at least one URL
};

CategoryShares category_distribution(std::span<const ResultList> lists, SearchTerm term,
                                     Segment segment, const CategoryTable& table);

double editable_share(std::span<const std::string> urls, const CategoryTable& table);

struct TldCensus {
  std::size_t total = 0;
  std::vector<std::pair<std::string, std::size_t>> per_party;  // sorted by party tag
};

// Distinct TLD count over every URL (organic and top stories) plus the
// per-party_owner attribution of those TLDs.
TldCensus distinct_tld_census(std::span<const ResultList> lists, const CategoryTable& table);

}  // namespace serpaudit
