#include "co2stream/classmap.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace co2stream {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

CategoryMap CategoryMap::defaults() {
  CategoryMap m;
  for (const auto& [raw, canonical] : std::initializer_list<std::pair<const char*, const char*>>{
           {"car", "car"},
           {"suv", "car"},
           {"taxi", "car"},
           {"private-car", "car"},
           {"government-car", "car"},
           {"van", "truck"},
           {"pickup", "truck"},
           {"truck", "truck"},
           {"bus", "bus"},
           {"minibus", "bus"},
           {"motorbike", "motorcycle"},
           {"motorcycle", "motorcycle"},
       }) {
    m.set(raw, canonical);
  }
  return m;
}

void CategoryMap::set(std::string_view raw, std::string canonical) {
  entries_[lowercase(raw)] = std::move(canonical);
}

std::vector<std::string> CategoryMap::categories() const {
  std::set<std::string> s;
  for (const auto& [raw, canonical] : entries_) s.insert(canonical);
  if (fallback) s.insert(*fallback);
  return {s.begin(), s.end()};
}

std::string map_label(std::string_view raw, const CategoryMap& map) {
  const std::string key = lowercase(raw);
  if (auto it = map.entries().find(key); it != map.entries().end()) return it->second;
  if (map.strict) throw UnknownLabel("unmapped label '" + std::string(raw) + "'");
  if (map.fallback) return *map.fallback;
  return key;
}

VehicleCounter::VehicleCounter(const std::vector<std::string>& categories) {
  for (const auto& c : categories) counts_[c] = 0;
}

void VehicleCounter::record(std::uint64_t track_id, const std::string& category) {
  Entry& e = tracks_[track_id];
  Vote& v = e.votes[category];
  v.count += 1;
  v.last_seq = ++seq_;

  const auto winner = std::max_element(e.votes.begin(), e.votes.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count < b.second.count;
    return a.second.last_seq < b.second.last_seq;
  });
  if (winner->first == e.current) return;
  if (!e.current.empty()) counts_[e.current] -= 1;
  e.current = winner->first;
  counts_[e.current] += 1;
}

std::map<std::string, std::size_t> VehicleCounter::counts() const { return counts_; }

std::optional<std::string> VehicleCounter::category_of(std::uint64_t track_id) const {
  auto it = tracks_.find(track_id);
  if (it == tracks_.end()) return std::nullopt;
  return it->second.current;
}

std::optional<std::string> VehicleCounter::release(std::uint64_t track_id) {
  auto it = tracks_.find(track_id);
  if (it == tracks_.end()) return std::nullopt;
  std::string category = std::move(it->second.current);
  counts_[category] -= 1;
  tracks_.erase(it);
  return category;
}

}  // namespace co2stream
