#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "serpaudit/catalog.hpp"
#include "serpaudit/model.hpp"
#include "serpaudit/overlap.hpp"

namespace serpaudit {

// Lowercase place names; entries shorter than 4 characters never match.
class Gazetteer {
 public:
  static Gazetteer from_file(const std::string& path);
  static Gazetteer from_text(std::string_view text);

  void add(std::string place);
  // Effective entries, longest first then lexicographic.
  const std::vector<std::string>& places() const { return places_; }

 private:
  std::vector<std::string> places_;
};

struct RegionalTag {
  bool regional = false;
  std::string place;
};

class RegionalTagTable {
 public:
  void set(std::string tld, RegionalTag tag);
  bool is_regional(const Tld& tld) const;
  const RegionalTag* find(const Tld& tld) const;
  std::size_t regional_count() const;
  std::string to_text() const;

 private:
  std::map<std::string, RegionalTag> map_;
};

// Flags an owned_content TLD as regional iff a gazetteer place occurs as a
// substring of the TLD once separators ('.', '-', '_', '/') are stripped
// from both sides. The longest matching place is recorded.
RegionalTagTable tag_regional(std::span<const Tld> tlds, const Gazetteer& gazetteer,
                              const CategoryTable& categories);

struct RefinedNonshared {
  double raw = 0.0;      // mean pairwise non-shared links, all URLs
  double refined = 0.0;  // regional URLs deleted from both lists first
  double refined_mean_list_length = 0.0;
};

// nullopt when the group has fewer than two lists.
std::optional<RefinedNonshared> refined_nonshared(const PairGroup& group,
                                                  const RegionalTagTable& table);

}  // namespace serpaudit
