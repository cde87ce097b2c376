#include "htsc/measure.hpp"

#include <bit>
#include <cmath>
#include <mutex>
#include <set>

namespace htsc {

std::size_t AtomRegistry::add(TimeSeries ts) {
  atoms_.push_back(std::move(ts));
  return atoms_.size() - 1;
}

double AtomRegistry::self_sdtw(std::size_t a, const SdtwConfig& cfg) const {
  Key key{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a),
          std::bit_cast<std::uint64_t>(cfg.gamma)};
  Shard& shard = self_cache_[KeyHash{}(key) % kShards];
  {
    std::shared_lock lock(shard.mu);
    auto it = shard.map.find(key);
    if (it != shard.map.end()) return it->second;
  }
  double v = soft_dtw(atom(a), atom(a), cfg);
  std::unique_lock lock(shard.mu);
  return shard.map.emplace(key, v).first->second;
}

double AtomRegistry::divergence(std::size_t a, std::size_t b, const SdtwConfig& cfg) const {
  if (a == b) return 0.0;
  Key key{static_cast<std::uint32_t>(std::min(a, b)),
          static_cast<std::uint32_t>(std::max(a, b)),
          std::bit_cast<std::uint64_t>(cfg.gamma)};
  Shard& shard = divergence_cache_[KeyHash{}(key) % kShards];
  {
    std::shared_lock lock(shard.mu);
    auto it = shard.map.find(key);
    if (it != shard.map.end()) return it->second;
  }
  double cross = soft_dtw(atom(key.a), atom(key.b), cfg);
  double d = sdtw_divergence_from_terms(cross, self_sdtw(key.a, cfg),
                                        self_sdtw(key.b, cfg));
  std::unique_lock lock(shard.mu);
  return shard.map.emplace(key, d).first->second;
}

void AtomRegistry::clear_cache() const {
  for (auto* caches : {&divergence_cache_, &self_cache_}) {
    for (auto& shard : *caches) {
      std::unique_lock lock(shard.mu);
      shard.map.clear();
    }
  }
}

std::size_t AtomRegistry::cache_entries() const {
  std::size_t n = 0;
  for (const auto* caches : {&divergence_cache_, &self_cache_}) {
    for (const auto& shard : *caches) {
      std::shared_lock lock(shard.mu);
      n += shard.map.size();
    }
  }
  return n;
}

ValidationReport validate_measure(const DiscreteMeasure& m) {
  if (m.atoms.empty()) return ValidationReport::bad("measure has no atoms");
  if (m.atoms.size() != m.weights.size())
    return ValidationReport::bad("measure atom/weight size mismatch");
  double total = 0.0;
  for (double w : m.weights) {
    if (!(w >= 0.0)) return ValidationReport::bad("measure has a negative weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    return ValidationReport::bad("measure weights do not sum to 1");
  std::set<std::size_t> seen(m.atoms.begin(), m.atoms.end());
  if (seen.size() != m.atoms.size())
    return ValidationReport::bad("measure has duplicate atom references");
  return ValidationReport::good();
}

DiscreteMeasure point_mass(std::size_t atom_id) { return {{atom_id}, {1.0}}; }

}  // namespace htsc
