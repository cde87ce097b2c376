#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "htsc/sdtw.hpp"
#include "htsc/time_series.hpp"

namespace htsc {

/// Owns the support series referenced by discrete measures and memoizes
/// pairwise divergences keyed by (atom, atom, gamma). The cache is sharded
/// behind shared mutexes for concurrent read/insert; atom insertion itself
/// is single-writer (it happens between parallel phases of a run).
class AtomRegistry {
 public:
  AtomRegistry() = default;
  AtomRegistry(const AtomRegistry&) = delete;
  AtomRegistry& operator=(const AtomRegistry&) = delete;

  std::size_t add(TimeSeries ts);
  const TimeSeries& atom(std::size_t id) const { return atoms_.at(id); }
  std::size_t size() const { return atoms_.size(); }

  /// Memoized soft-DTW divergence between two atoms; exact 0 for a == b.
  double divergence(std::size_t a, std::size_t b, const SdtwConfig& cfg) const;

  void clear_cache() const;
  std::size_t cache_entries() const;

 private:
  struct Key {
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::uint64_t gamma_bits = 0;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = k.gamma_bits * 0x9e3779b97f4a7c15ULL;
      h ^= (static_cast<std::uint64_t>(k.a) << 32 | k.b) + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h * 0xbf58476d1ce4e5b9ULL);
    }
  };
  struct Shard {
    mutable std::shared_mutex mu;
    std::unordered_map<Key, double, KeyHash> map;
  };
  static constexpr std::size_t kShards = 16;

  double self_sdtw(std::size_t a, const SdtwConfig& cfg) const;

  std::deque<TimeSeries> atoms_;  // stable addresses
  mutable std::array<Shard, kShards> divergence_cache_;
  mutable std::array<Shard, kShards> self_cache_;
};

/// Weighted atoms over registry supports. Weights live on the probability
/// simplex; atoms are unique references.
struct DiscreteMeasure {
  std::vector<std::size_t> atoms;
  std::vector<double> weights;

  std::size_t size() const { return atoms.size(); }
};

ValidationReport validate_measure(const DiscreteMeasure& m);

/// Point mass on a single atom.
DiscreteMeasure point_mass(std::size_t atom_id);

}  // namespace htsc
