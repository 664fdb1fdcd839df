#include "serpaudit/region.hpp"

#include <algorithm>
#include <unordered_map>

#include "serpaudit/util.hpp"

namespace serpaudit {
namespace {

std::string strip_separators(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != '.' && c != '-' && c != '_' && c != '/') out.push_back(c);
  }
  return out;
}

}  // namespace

Gazetteer Gazetteer::from_file(const std::string& path) {
  return from_text(util::read_text_file(path));
}

Gazetteer Gazetteer::from_text(std::string_view text) {
  Gazetteer g;
  for (const auto& raw : util::split(text, '\n')) {
    std::string_view line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    g.add(std::string(line));
  }
  return g;
}

void Gazetteer::add(std::string place) {
  std::string normalized = strip_separators(util::to_lower(place));
  if (normalized.size() < 4) return;
  if (std::find(places_.begin(), places_.end(), normalized) != places_.end()) return;
  places_.push_back(std::move(normalized));
  std::sort(places_.begin(), places_.end(), [](const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a < b;
  });
}

void RegionalTagTable::set(std::string tld, RegionalTag tag) {
  map_[util::to_lower(tld)] = std::move(tag);
}

bool RegionalTagTable::is_regional(const Tld& tld) const {
  auto it = map_.find(tld.value);
  return it != map_.end() && it->second.regional;
}

const RegionalTag* RegionalTagTable::find(const Tld& tld) const {
  auto it = map_.find(tld.value);
  return it == map_.end() ? nullptr : &it->second;
}

std::size_t RegionalTagTable::regional_count() const {
  std::size_t count = 0;
  for (const auto& [tld, tag] : map_) {
    if (tag.regional) ++count;
  }
  return count;
}

std::string RegionalTagTable::to_text() const {
  std::string out = "tld\tregional\tplace\n";
  for (const auto& [tld, tag] : map_) {
    out += tld;
    out.push_back('\t');
    out += tag.regional ? "1" : "0";
    out.push_back('\t');
    out += tag.regional ? tag.place : "-";
    out.push_back('\n');
  }
  return out;
}

RegionalTagTable tag_regional(std::span<const Tld> tlds, const Gazetteer& gazetteer,
                              const CategoryTable& categories) {
  RegionalTagTable table;
  for (const auto& tld : tlds) {
    RegionalTag tag;
    if (categories.classify(tld).main == MainCategory::owned_content) {
      std::string stripped = strip_separators(util::to_lower(tld.value));
      for (const auto& place : gazetteer.places()) {
        if (stripped.find(place) != std::string::npos) {
          tag.regional = true;
          tag.place = place;
          break;
        }
      }
    }
    table.set(tld.value, std::move(tag));
  }
  return table;
}

std::optional<RefinedNonshared> refined_nonshared(const PairGroup& group,
                                                  const RegionalTagTable& table) {
  const std::size_t n = group.members.size();
  if (n < 2) return std::nullopt;

  std::unordered_map<std::string_view, std::uint32_t> ids;
  std::vector<bool> id_regional;
  std::vector<std::vector<std::uint32_t>> full(n);
  std::vector<std::vector<std::uint32_t>> kept(n);
  std::uint64_t kept_length_sum = 0;

  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& url : member_urls(group, i)) {
      auto [it, inserted] = ids.emplace(url, static_cast<std::uint32_t>(ids.size()));
      if (inserted) {
        auto tld = try_extract_tld(url);
        id_regional.push_back(tld && table.is_regional(*tld));
      }
      full[i].push_back(it->second);
    }
    std::sort(full[i].begin(), full[i].end());
    full[i].erase(std::unique(full[i].begin(), full[i].end()), full[i].end());
    for (std::uint32_t id : full[i]) {
      if (!id_regional[id]) kept[i].push_back(id);
    }
    kept_length_sum += kept[i].size();
  }

  auto intersection_size = [](const std::vector<std::uint32_t>& a,
                              const std::vector<std::uint32_t>& b) {
    std::uint64_t count = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j]) {
        ++i;
      } else if (b[j] < a[i]) {
        ++j;
      } else {
        ++count;
        ++i;
        ++j;
      }
    }
    return count;
  };

  // Per pair, non-shared = (|A| + |B|) / 2 - |A ∩ B|; the sums stay integral
  // by accumulating twice the value.
  std::uint64_t raw_twice = 0;
  std::uint64_t refined_twice = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      raw_twice += full[i].size() + full[j].size() - 2 * intersection_size(full[i], full[j]);
      refined_twice +=
          kept[i].size() + kept[j].size() - 2 * intersection_size(kept[i], kept[j]);
    }
  }
  const double n_pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  RefinedNonshared result;
  result.raw = static_cast<double>(raw_twice) / (2.0 * n_pairs);
  result.refined = static_cast<double>(refined_twice) / (2.0 * n_pairs);
  result.refined_mean_list_length = static_cast<double>(kept_length_sum) / static_cast<double>(n);
  return result;
}

}  // namespace serpaudit
