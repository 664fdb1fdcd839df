#include "serpaudit/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "serpaudit/util.hpp"

namespace serpaudit {
namespace {

constexpr std::array<std::string_view, kMainCategoryCount> kMainNames = {
    "owned_content", "social_media", "wikipedia", "media", "freemail", "publicly_funded",
    "other"};

constexpr std::array<std::string_view, 4> kSubNames = {"print", "tv", "public_service",
                                                       "online_only"};

std::vector<std::string> table_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) {
        fields.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) fields.push_back(std::move(current));
  return fields;
}

}  // namespace

std::string_view to_string(MainCategory c) { return kMainNames[static_cast<int>(c)]; }
std::string_view to_string(MediaSub s) { return kSubNames[static_cast<int>(s)]; }

std::optional<MainCategory> main_category_from_string(std::string_view s) {
  for (int i = 0; i < kMainCategoryCount; ++i) {
    if (s == kMainNames[i]) return static_cast<MainCategory>(i);
  }
  return std::nullopt;
}

std::optional<MediaSub> media_sub_from_string(std::string_view s) {
  for (int i = 0; i < static_cast<int>(kSubNames.size()); ++i) {
    if (s == kSubNames[i]) return static_cast<MediaSub>(i);
  }
  return std::nullopt;
}

bool is_wikipedia_host(std::string_view host) {
  return host == "wikipedia.org" || util::ends_with(host, ".wikipedia.org");
}

bool is_editable(MainCategory c) {
  return c == MainCategory::owned_content || c == MainCategory::social_media ||
         c == MainCategory::wikipedia;
}

CategoryTable CategoryTable::from_file(const std::string& path) {
  return from_text(util::read_text_file(path));
}

CategoryTable CategoryTable::from_text(std::string_view text) {
  CategoryTable table;
  for (const auto& raw : util::split(text, '\n')) {
    std::string_view line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto hash = line.find('#');
    if (hash != std::string_view::npos) line = util::trim(line.substr(0, hash));
    auto fields = table_fields(line);
    if (fields.size() != 4) {
      throw std::runtime_error("bad category table line (want 4 columns): " + std::string(raw));
    }
    DomainCategory category;
    auto main = main_category_from_string(fields[1]);
    if (!main) throw std::runtime_error("bad main category: " + fields[1]);
    category.main = *main;
    if (fields[2] != "-") {
      auto sub = media_sub_from_string(fields[2]);
      if (!sub) throw std::runtime_error("bad media sub-category: " + fields[2]);
      category.media_sub = *sub;
    }
    if (fields[3] != "-") category.party_owner = fields[3];
    if (category.media_sub.has_value() != (category.main == MainCategory::media)) {
      throw std::runtime_error("media_sub must be present exactly for media: " + fields[0]);
    }
    if (category.party_owner && category.main != MainCategory::owned_content) {
      throw std::runtime_error("party_owner only valid for owned_content: " + fields[0]);
    }
    table.set(fields[0], category);
  }
  return table;
}

void CategoryTable::set(std::string tld, DomainCategory category) {
  map_[util::to_lower(tld)] = std::move(category);
}

DomainCategory CategoryTable::classify(const Tld& tld) const {
  if (is_wikipedia_host(tld.value)) return DomainCategory{MainCategory::wikipedia, {}, {}};
  auto it = map_.find(tld.value);
  if (it == map_.end()) return DomainCategory{};
  return it->second;
}

std::string CategoryTable::to_text() const {
  std::string out;
  for (const auto& [tld, category] : map_) {
    out += tld;
    out.push_back('\t');
    out += to_string(category.main);
    out.push_back('\t');
    out += category.media_sub ? to_string(*category.media_sub) : "-";
    out.push_back('\t');
    out += category.party_owner ? *category.party_owner : "-";
    out.push_back('\n');
  }
  return out;
}

DomainCategory classify(const Tld& tld, const CategoryTable& table) { return table.classify(tld); }

std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::organic: return "organic";
    case Segment::top_stories: return "top_stories";
    case Segment::news: return "news";
  }
  return "";
}

std::optional<Segment> segment_from_string(std::string_view s) {
  if (s == "organic") return Segment::organic;
  if (s == "top_stories") return Segment::top_stories;
  if (s == "news") return Segment::news;
  return std::nullopt;
}

const std::vector<std::string>* segment_urls(const ResultList& list, Segment segment) {
  switch (segment) {
    case Segment::organic:
      return list.search_type == SearchType::google_search ? &list.organic : nullptr;
    case Segment::top_stories:
      return list.search_type == SearchType::google_search ? &list.top_stories : nullptr;
    case Segment::news:
      return list.search_type == SearchType::google_news ? &list.organic : nullptr;
  }
  return nullptr;
}

std::vector<TldCount> top_tlds(std::span<const ResultList> lists, SearchTerm term, std::size_t k,
                               Segment segment) {
  std::map<std::string, std::size_t> counts;
  for (const auto& list : lists) {
    if (list.term != term) continue;
    const auto* urls = segment_urls(list, segment);
    if (!urls) continue;
    for (const auto& url : *urls) {
      auto tld = try_extract_tld(url);
      if (tld) ++counts[tld->value];
    }
  }
  std::vector<TldCount> ranked;
  ranked.reserve(counts.size());
  for (auto& [tld, count] : counts) ranked.push_back({Tld{tld}, count});
  std::stable_sort(ranked.begin(), ranked.end(), [](const TldCount& a, const TldCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.tld.value < b.tld.value;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

CategoryShares category_distribution(std::span<const ResultList> lists, SearchTerm term,
                                     Segment segment, const CategoryTable& table) {
  CategoryShares result;
  std::array<double, kMainCategoryCount> sums{};
  for (const auto& list : lists) {
    if (list.term != term) continue;
    const auto* urls = segment_urls(list, segment);
    if (!urls || urls->empty()) continue;
    std::array<std::size_t, kMainCategoryCount> counts{};
    for (const auto& url : *urls) {
      auto tld = try_extract_tld(url);
      MainCategory main = tld ? table.classify(*tld).main : MainCategory::other;
      ++counts[static_cast<int>(main)];
    }
    for (int i = 0; i < kMainCategoryCount; ++i) {
      sums[i] += static_cast<double>(counts[i]) / static_cast<double>(urls->size());
    }
    ++result.n_lists;
  }
  if (result.n_lists > 0) {
    for (int i = 0; i < kMainCategoryCount; ++i) {
      result.main[i] = sums[i] / static_cast<double>(result.n_lists);
    }
  }
  return result;
}

double editable_share(std::span<const std::string> urls, const CategoryTable& table) {
  if (urls.empty()) return 0.0;
  std::size_t editable = 0;
  for (const auto& url : urls) {
    auto tld = try_extract_tld(url);
    if (tld && is_editable(table.classify(*tld).main)) ++editable;
  }
  return static_cast<double>(editable) / static_cast<double>(urls.size());
}

TldCensus distinct_tld_census(std::span<const ResultList> lists, const CategoryTable& table) {
  std::set<std::string> tlds;
  for (const auto& list : lists) {
    for (const auto& url : list.organic) {
      if (auto tld = try_extract_tld(url)) tlds.insert(tld->value);
    }
    for (const auto& url : list.top_stories) {
      if (auto tld = try_extract_tld(url)) tlds.insert(tld->value);
    }
  }
  TldCensus census;
  census.total = tlds.size();
  std::map<std::string, std::size_t> per_party;
  for (const auto& tld : tlds) {
    auto category = table.classify(Tld{tld});
    if (category.party_owner) ++per_party[*category.party_owner];
  }
  census.per_party.assign(per_party.begin(), per_party.end());
  return census;
}

}  // namespace serpaudit
