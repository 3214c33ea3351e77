#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace relit {

// Data domains and the teacher that supervises each.
enum class DomainTag { Curated, Video, Olat, Residual };
enum class Teacher { Real, Refl, Phys };

inline constexpr std::array<DomainTag, 4> kDomainTags = {DomainTag::Curated, DomainTag::Video, DomainTag::Olat,
                                                         DomainTag::Residual};

inline const char* to_string(DomainTag t) {
  switch (t) {
    case DomainTag::Curated: return "curated";
    case DomainTag::Video: return "video";
    case DomainTag::Olat: return "olat";
    case DomainTag::Residual: return "residual";
  }
  return "?";
}

inline const char* to_string(Teacher t) {
  switch (t) {
    case Teacher::Real: return "real";
    case Teacher::Refl: return "refl";
    case Teacher::Phys: return "phys";
  }
  return "?";
}

inline DomainTag domain_tag_from_string(const std::string& s) {
  for (auto t : kDomainTags)
    if (s == to_string(t)) return t;
  throw std::invalid_argument("unknown domain tag '" + s + "'");
}

inline Teacher teacher_from_string(const std::string& s) {
  for (auto t : {Teacher::Real, Teacher::Refl, Teacher::Phys})
    if (s == to_string(t)) return t;
  throw std::invalid_argument("unknown teacher '" + s + "'");
}

struct DatasetEntry {
  std::string id;
  DomainTag tag = DomainTag::Curated;
  std::map<std::string, std::string> files;
};

struct DatasetManifest {
  std::vector<DatasetEntry> entries;
  std::uint64_t seed = 0;

  void validate() const {
    std::set<std::string> ids;
    for (const auto& e : entries)
      if (!ids.insert(e.id).second) throw std::invalid_argument("DatasetManifest: duplicate id '" + e.id + "'");
  }
};

inline DatasetManifest dataset_manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.seed = j.value("seed", std::uint64_t{0});
  for (const auto& e : j.at("entries")) {
    DatasetEntry d;
    d.id = e.at("id").get<std::string>();
    d.tag = domain_tag_from_string(e.at("tag").get<std::string>());
    if (e.contains("files")) d.files = e.at("files").get<std::map<std::string, std::string>>();
    m.entries.push_back(std::move(d));
  }
  m.validate();
  return m;
}

struct RoutingPlan {
  // Indexed by DomainTag.
  std::array<double, 4> fractions = {0.60, 0.15, 0.10, 0.15};
  std::array<Teacher, 4> teachers = {Teacher::Real, Teacher::Real, Teacher::Refl, Teacher::Phys};
  int batch_size = 8;
  bool allow_wrap = true;

  double fraction(DomainTag t) const { return fractions[static_cast<int>(t)]; }
  Teacher teacher(DomainTag t) const { return teachers[static_cast<int>(t)]; }

  void validate() const {
    double s = 0.0;
    for (double f : fractions) {
      if (!(f >= 0.0)) throw std::invalid_argument("RoutingPlan: negative fraction");
      s += f;
    }
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("RoutingPlan: fractions must sum to 1");
    if (batch_size < 1) throw std::invalid_argument("RoutingPlan: batch size must be >= 1");
  }
};

inline RoutingPlan routing_plan_from_json(const nlohmann::json& j) {
  RoutingPlan p;
  if (j.contains("fractions")) {
    p.fractions = {0, 0, 0, 0};
    for (const auto& [k, v] : j.at("fractions").items()) p.fractions[static_cast<int>(domain_tag_from_string(k))] = v.get<double>();
  }
  if (j.contains("teachers"))
    for (const auto& [k, v] : j.at("teachers").items())
      p.teachers[static_cast<int>(domain_tag_from_string(k))] = teacher_from_string(v.get<std::string>());
  p.batch_size = j.value("batch_size", p.batch_size);
  p.allow_wrap = j.value("allow_wrap", p.allow_wrap);
  p.validate();
  return p;
}

// Largest-remainder apportionment of batch_size over the tag fractions; ties
// go to the lower tag index.
inline std::array<int, 4> batch_counts(const RoutingPlan& plan) {
  plan.validate();
  std::array<int, 4> counts{};
  std::array<double, 4> rem{};
  int assigned = 0;
  for (int t = 0; t < 4; ++t) {
    double exact = plan.fractions[t] * plan.batch_size;
    counts[t] = static_cast<int>(std::floor(exact + 1e-9));
    rem[t] = exact - counts[t];
    assigned += counts[t];
  }
  std::array<int, 4> order = {0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int i = 0; assigned < plan.batch_size; ++i) {
    int t = order[i % 4];
    if (plan.fractions[t] <= 0.0) continue;
    ++counts[t];
    ++assigned;
  }
  return counts;
}

struct RoutedItem {
  std::string id;
  DomainTag tag;
  Teacher teacher;
  bool wrapped = false;  // drawn from a reshuffled pool after exhaustion
};

struct Batch {
  std::vector<RoutedItem> items;
};

// Draws batches without replacement from per-tag pools shuffled under `seed`.
// `num_batches` <= 0 means one epoch: enough batches for the slowest-draining
// pool to be consumed once.
inline std::vector<Batch> route_batches(const DatasetManifest& manifest, const RoutingPlan& plan, std::uint64_t seed,
                                        int num_batches = 0) {
  manifest.validate();
  auto counts = batch_counts(plan);
  std::array<std::vector<const DatasetEntry*>, 4> pools;
  for (const auto& e : manifest.entries) pools[static_cast<int>(e.tag)].push_back(&e);
  for (int t = 0; t < 4; ++t)
    if (counts[t] > 0 && pools[t].empty())
      throw std::invalid_argument(std::string("route_batches: no entries for tag '") + to_string(kDomainTags[t]) + "'");

  if (num_batches <= 0) {
    num_batches = 0;
    for (int t = 0; t < 4; ++t)
      if (counts[t] > 0)
        num_batches = std::max(num_batches, static_cast<int>((pools[t].size() + counts[t] - 1) / counts[t]));
  }

  std::mt19937_64 rng(seed);
  std::array<std::size_t, 4> cursor{};
  std::array<bool, 4> wrapped{};
  for (auto& p : pools) std::shuffle(p.begin(), p.end(), rng);

  std::vector<Batch> batches(num_batches);
  for (auto& b : batches) {
    for (int t = 0; t < 4; ++t)
      for (int k = 0; k < counts[t]; ++k) {
        if (cursor[t] == pools[t].size()) {
          if (!plan.allow_wrap)
            throw std::runtime_error(std::string("route_batches: pool '") + to_string(kDomainTags[t]) +
                                     "' exhausted and wrapping is disabled");
          std::shuffle(pools[t].begin(), pools[t].end(), rng);
          cursor[t] = 0;
          wrapped[t] = true;
        }
        const DatasetEntry* e = pools[t][cursor[t]++];
        b.items.push_back({e->id, e->tag, plan.teacher(e->tag), wrapped[t]});
      }
  }
  return batches;
}

inline nlohmann::json to_json(const std::vector<Batch>& batches) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& b : batches) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& it : b.items)
      items.push_back({{"id", it.id}, {"tag", to_string(it.tag)}, {"teacher", to_string(it.teacher)}, {"wrapped", it.wrapped}});
    out.push_back(items);
  }
  return out;
}

}  // namespace relit
