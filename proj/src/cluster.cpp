#include "htsc/cluster.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "htsc/errors.hpp"
#include "htsc/matrix.hpp"
#include "htsc/parallel.hpp"

namespace htsc {

std::string to_string(ClusterMode mode) {
  switch (mode) {
    case ClusterMode::multilevel: return "multilevel";
    case ClusterMode::two_level_alt: return "two-level-alt";
    case ClusterMode::levelwise: return "levelwise";
  }
  return "multilevel";
}

ClusterMode cluster_mode_from_string(const std::string& s) {
  if (s == "multilevel") return ClusterMode::multilevel;
  if (s == "two-level-alt") return ClusterMode::two_level_alt;
  if (s == "levelwise") return ClusterMode::levelwise;
  throw DataError("unknown cluster mode: " + s);
}

namespace {

/// Series-space kernel: items are raw series, centroids are divergence
/// means. Self soft-DTW terms are cached so each distance costs one DP pass.
class BottomKernel {
 public:
  using Centroid = TimeSeries;

  BottomKernel(const std::vector<const TimeSeries*>& items, const ClusterConfig& cfg)
      : items_(items), cfg_(cfg), item_self_(items.size()) {
    parallel_for(items_.size(), [&](std::size_t i) {
      item_self_[i] = soft_dtw(*items_[i], *items_[i], cfg_.sdtw);
    });
  }

  std::size_t item_count() const { return items_.size(); }
  std::size_t centroid_count() const { return centroids_.size(); }
  const std::vector<TimeSeries>& centroids() const { return centroids_; }

  void resize_centroids(std::size_t k) {
    centroids_.resize(k);
    centroid_self_.resize(k, 0.0);
  }

  void seed_from_item(std::size_t slot, std::size_t item) {
    centroids_[slot] = *items_[item];
    centroid_self_[slot] = item_self_[item];
  }

  double distance(std::size_t i, std::size_t c) const {
    double cross = soft_dtw(*items_[i], centroids_[c], cfg_.sdtw);
    return sdtw_divergence_from_terms(cross, item_self_[i], centroid_self_[c]);
  }

  double item_distance(std::size_t i, std::size_t j) const {
    double cross = soft_dtw(*items_[i], *items_[j], cfg_.sdtw);
    return sdtw_divergence_from_terms(cross, item_self_[i], item_self_[j]);
  }

  double centroid_distance(std::size_t a, std::size_t b) const {
    double cross = soft_dtw(centroids_[a], centroids_[b], cfg_.sdtw);
    return sdtw_divergence_from_terms(cross, centroid_self_[a], centroid_self_[b]);
  }

  Centroid get_centroid(std::size_t c) const { return centroids_[c]; }

  void set_centroid(std::size_t c, Centroid value) {
    centroids_[c] = std::move(value);
    centroid_self_[c] = soft_dtw(centroids_[c], centroids_[c], cfg_.sdtw);
  }

  Centroid propose(std::size_t slot, const std::vector<std::size_t>& members,
                   std::uint64_t /*substream*/) const {
    std::vector<const TimeSeries*> m;
    m.reserve(members.size());
    for (std::size_t i : members) m.push_back(items_[i]);
    return sdtw_mean(m, centroids_[slot], cfg_.sdtw, cfg_.mean).mean;
  }

  void keep_centroids(const std::vector<char>& keep) {
    std::size_t w = 0;
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
      if (!keep[c]) continue;
      if (w != c) {
        centroids_[w] = std::move(centroids_[c]);
        centroid_self_[w] = centroid_self_[c];
      }
      ++w;
    }
    centroids_.resize(w);
    centroid_self_.resize(w);
  }

 private:
  const std::vector<const TimeSeries*>& items_;
  const ClusterConfig& cfg_;
  std::vector<double> item_self_;
  std::vector<TimeSeries> centroids_;
  std::vector<double> centroid_self_;
};

/// Measure-space kernel: items are lifted measures, centroids free-support
/// barycenters, distances transport costs with the divergence ground cost
/// memoized through the shared registry.
class MeasureKernel {
 public:
  using Centroid = DiscreteMeasure;

  MeasureKernel(std::vector<DiscreteMeasure> items, AtomRegistry& reg,
                const ClusterConfig& cfg, int support_size, std::uint64_t rng_base)
      : items_(std::move(items)),
        reg_(reg),
        cfg_(cfg),
        support_size_(support_size),
        rng_base_(rng_base) {}

  std::size_t item_count() const { return items_.size(); }
  std::size_t centroid_count() const { return centroids_.size(); }
  const std::vector<DiscreteMeasure>& centroids() const { return centroids_; }
  const std::vector<DiscreteMeasure>& items() const { return items_; }
  AtomRegistry& registry() { return reg_; }

  void replace_items(std::vector<DiscreteMeasure> items) { items_ = std::move(items); }

  void resize_centroids(std::size_t k) { centroids_.resize(k); }

  void seed_from_item(std::size_t slot, std::size_t item) {
    centroids_[slot] = items_[item];
  }

  double measure_distance(const DiscreteMeasure& a, const DiscreteMeasure& b) const {
    return w_sdtw(a, b, reg_, cfg_.sdtw, cfg_.ot);
  }

  double distance(std::size_t i, std::size_t c) const {
    return measure_distance(items_[i], centroids_[c]);
  }

  double item_distance(std::size_t i, std::size_t j) const {
    return measure_distance(items_[i], items_[j]);
  }

  double centroid_distance(std::size_t a, std::size_t b) const {
    return measure_distance(centroids_[a], centroids_[b]);
  }

  Centroid get_centroid(std::size_t c) const { return centroids_[c]; }
  void set_centroid(std::size_t c, Centroid value) { centroids_[c] = std::move(value); }

  Centroid propose(std::size_t slot, const std::vector<std::size_t>& members,
                   std::uint64_t substream) const {
    std::vector<DiscreteMeasure> ms;
    ms.reserve(members.size());
    for (std::size_t i : members) ms.push_back(items_[i]);
    std::vector<double> lambda(ms.size(), 1.0 / static_cast<double>(ms.size()));
    Rng rng(derive_seed(rng_base_, "barycenter", substream));
    auto res = free_support_barycenter(ms, lambda, support_size_, reg_, cfg_.sdtw,
                                       cfg_.ot, cfg_.mean, cfg_.barycenter, rng,
                                       &centroids_[slot]);
    return res.measure;
  }

  void keep_centroids(const std::vector<char>& keep) {
    std::size_t w = 0;
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
      if (!keep[c]) continue;
      if (w != c) centroids_[w] = std::move(centroids_[c]);
      ++w;
    }
    centroids_.resize(w);
  }

 private:
  std::vector<DiscreteMeasure> items_;
  AtomRegistry& reg_;
  const ClusterConfig& cfg_;
  int support_size_;
  std::uint64_t rng_base_;
  std::vector<DiscreteMeasure> centroids_;
};

/// Shared Lloyd machinery: distance matrix bookkeeping, k-means++ seeding,
/// one centering + assignment iteration with per-cluster acceptance (reject
/// centroid updates that raise the cluster objective), and empty-cluster
/// reseeding. Keeps the loss trace literally nonincreasing.
template <class Kernel>
class LloydState {
 public:
  LloydState(Kernel& kern, int k) : kern_(kern), k_(k) {}

  std::vector<int>& assignment() { return z_; }
  const std::vector<int>& assignment() const { return z_; }
  std::vector<double>& trace() { return trace_; }
  std::vector<std::string>& events() { return events_; }
  const Matrix& distances() const { return dist_; }

  double loss() const {
    double s = 0.0;
    for (std::size_t i = 0; i < z_.size(); ++i) s += dist_(i, z_[i]);
    return s;
  }

  void recompute_column(std::size_t c) {
    parallel_for(kern_.item_count(),
                 [&](std::size_t i) { dist_(i, c) = kern_.distance(i, c); });
  }

  void recompute_all() {
    dist_ = Matrix(kern_.item_count(), k_);
    parallel_for(kern_.item_count(), [&](std::size_t i) {
      for (std::size_t c = 0; c < static_cast<std::size_t>(k_); ++c)
        dist_(i, c) = kern_.distance(i, c);
    });
  }

  void seed(Rng& rng) {
    const std::size_t n = kern_.item_count();
    if (static_cast<std::size_t>(k_) > n)
      throw DataError("clustering: k exceeds the number of items");
    kern_.resize_centroids(k_);

    std::vector<std::size_t> chosen;
    chosen.push_back(rng.index(n));
    std::vector<double> min_d(n);
    parallel_for(n, [&](std::size_t i) {
      min_d[i] = std::max(0.0, kern_.item_distance(i, chosen[0]));
    });
    while (chosen.size() < static_cast<std::size_t>(k_)) {
      double total = std::accumulate(min_d.begin(), min_d.end(), 0.0);
      std::size_t next;
      if (total > 0.0) {
        next = rng.sample_weighted(min_d);
      } else {
        next = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
            next = i;
            break;
          }
        }
        if (next == n) break;  // fewer distinct items than k
      }
      chosen.push_back(next);
      parallel_for(n, [&](std::size_t i) {
        min_d[i] = std::min(min_d[i], std::max(0.0, kern_.item_distance(i, next)));
      });
    }
    for (std::size_t s = 0; s < chosen.size(); ++s) kern_.seed_from_item(s, chosen[s]);
    for (std::size_t s = chosen.size(); s < static_cast<std::size_t>(k_); ++s)
      kern_.seed_from_item(s, chosen[s % chosen.size()]);

    recompute_all();
    z_.assign(n, 0);
    assign_step();
    trace_.push_back(loss());
  }

  /// Adopt an existing assignment (used by post-processing fine-tuning).
  void adopt(std::vector<int> assignment) {
    z_ = std::move(assignment);
    recompute_all();
    trace_.push_back(loss());
  }

  /// Recompute distances after the kernel's items were replaced. The
  /// objective baseline changes, so the discontinuity is logged.
  void refresh_items() {
    recompute_all();
    events_.push_back("items_rebuilt@" + std::to_string(trace_.size()));
    trace_.push_back(loss());
  }

  bool center_step(std::uint64_t iter_tag) {
    const std::size_t n = kern_.item_count();
    std::vector<std::vector<std::size_t>> members(k_);
    for (std::size_t i = 0; i < n; ++i) members[z_[i]].push_back(i);
    bool any = false;
    for (std::size_t c = 0; c < static_cast<std::size_t>(k_); ++c) {
      if (members[c].empty()) continue;
      double before = 0.0;
      for (std::size_t i : members[c]) before += dist_(i, c);
      std::vector<double> old_col(n);
      for (std::size_t i = 0; i < n; ++i) old_col[i] = dist_(i, c);
      auto old_centroid = kern_.get_centroid(c);

      auto candidate = kern_.propose(c, members[c], (iter_tag << 16) | c);
      kern_.set_centroid(c, std::move(candidate));
      recompute_column(c);
      double after = 0.0;
      for (std::size_t i : members[c]) after += dist_(i, c);
      if (after > before) {
        kern_.set_centroid(c, std::move(old_centroid));
        for (std::size_t i = 0; i < n; ++i) dist_(i, c) = old_col[i];
      } else if (after < before) {
        any = true;
      }
    }
    return any;
  }

  int assign_step() {
    int changed = 0;
    for (std::size_t i = 0; i < z_.size(); ++i) {
      int best = 0;
      for (int c = 1; c < k_; ++c)
        if (dist_(i, c) < dist_(i, best)) best = c;  // ties keep the lowest index
      if (best != z_[i]) {
        z_[i] = best;
        ++changed;
      }
    }
    return changed;
  }

  bool reseed_empty() {
    std::vector<int> sizes(k_, 0);
    for (int c : z_) ++sizes[c];
    bool reseeded = false;
    std::set<std::size_t> used;
    for (int c = 0; c < k_; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t worst = z_.size();
      double worst_d = 0.0;
      for (std::size_t i = 0; i < z_.size(); ++i) {
        if (used.count(i)) continue;
        double d = dist_(i, z_[i]);
        if (worst == z_.size() || d > worst_d) {
          worst = i;
          worst_d = d;
        }
      }
      if (worst == z_.size() || !(worst_d > 0.0)) continue;  // nothing to gain
      kern_.seed_from_item(c, worst);
      recompute_column(c);
      used.insert(worst);
      events_.push_back("reseed: cluster " + std::to_string(c) + " <- item " +
                        std::to_string(worst));
      reseeded = true;
    }
    return reseeded;
  }

  /// One centering + assignment round; returns whether anything moved.
  bool iterate(std::uint64_t iter_tag, bool allow_reseed = true) {
    center_step(iter_tag);
    trace_.push_back(std::min(loss(), trace_.back()));
    int changed = assign_step();
    trace_.push_back(std::min(loss(), trace_.back()));
    bool reseeded = allow_reseed && reseed_empty();
    return changed > 0 || reseeded;
  }

  int cluster_count() const { return k_; }
  void set_cluster_count(int k) { k_ = k; }

 private:
  Kernel& kern_;
  int k_;
  Matrix dist_;
  std::vector<int> z_;
  std::vector<double> trace_;
  std::vector<std::string> events_;
};

template <class Kernel>
LevelClusterModel run_lloyd(Kernel& kern, int k, const ClusterConfig& cfg, Rng& rng) {
  LloydState<Kernel> st(kern, k);
  st.seed(rng);
  for (int it = 0; it < cfg.max_outer_iter; ++it) {
    if (!st.iterate(static_cast<std::uint64_t>(it) + 1)) break;
  }
  LevelClusterModel model;
  model.k = k;
  model.assignment = st.assignment();
  model.loss_trace = st.trace();
  model.events = st.events();
  return model;
}

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);  // keep the lowest index
  }
};

template <class Kernel>
double auto_merge_eps(const Kernel& kern) {
  const int k = static_cast<int>(kern.centroid_count());
  if (k < 2) return 0.0;
  std::vector<double> d;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) d.push_back(kern.centroid_distance(i, j));
  std::sort(d.begin(), d.end());
  double median = d.size() % 2 == 1 ? d[d.size() / 2]
                                    : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
  return 0.01 * median;
}

/// Merge closure under merge_eps, removal of clusters at or below
/// remove_eps members, then one fine-tuning pass. Mutates the kernel's
/// centroids and the model's assignment/traces.
template <class Kernel>
void apply_merge_remove(Kernel& kern, LevelClusterModel& model, double merge_eps,
                        int remove_eps) {
  int k = static_cast<int>(kern.centroid_count());
  auto& z = model.assignment;
  if (merge_eps < 0.0) merge_eps = auto_merge_eps(kern);

  // Transitive merge closure.
  DisjointSet dsu(k);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if (kern.centroid_distance(i, j) < merge_eps) dsu.unite(i, j);

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < z.size(); ++i) members[z[i]].push_back(i);

  for (int rep = 0; rep < k; ++rep) {
    if (dsu.find(rep) != rep) continue;
    std::vector<int> group;
    for (int c = 0; c < k; ++c)
      if (dsu.find(c) == rep) group.push_back(c);
    if (group.size() < 2) continue;
    std::vector<std::size_t> merged;
    for (int c : group) merged.insert(merged.end(), members[c].begin(), members[c].end());
    std::sort(merged.begin(), merged.end());
    if (!merged.empty()) {
      auto old_centroid = kern.get_centroid(rep);
      double before = 0.0;
      for (std::size_t i : merged) before += kern.distance(i, rep);
      auto candidate = kern.propose(rep, merged, 0x4d455247ull + rep);
      kern.set_centroid(rep, std::move(candidate));
      double after = 0.0;
      for (std::size_t i : merged) after += kern.distance(i, rep);
      if (after > before) kern.set_centroid(rep, std::move(old_centroid));
    }
    std::string what = "merge:";
    for (int c : group) what += " " + std::to_string(c);
    model.events.push_back(what + " -> " + std::to_string(rep));
  }
  for (auto& label : z) label = dsu.find(label);

  // Removal by post-merge size.
  std::vector<int> sizes(k, 0);
  for (int c : z) ++sizes[c];
  std::vector<char> survivor(k, 0);
  bool any_survivor = false;
  for (int c = 0; c < k; ++c) {
    if (dsu.find(c) == c && sizes[c] > remove_eps) {
      survivor[c] = 1;
      any_survivor = true;
    }
  }
  if (!any_survivor) throw DataError("remove_eps too aggressive: no cluster survives");

  for (std::size_t i = 0; i < z.size(); ++i) {
    if (survivor[z[i]]) continue;
    int best = -1;
    double best_d = 0.0;
    for (int c = 0; c < k; ++c) {
      if (!survivor[c]) continue;
      double d = kern.distance(i, c);
      if (best < 0 || d < best_d) {
        best = c;
        best_d = d;
      }
    }
    z[i] = best;
  }
  for (int c = 0; c < k; ++c) {
    if (dsu.find(c) == c && !survivor[c] && sizes[c] > 0)
      model.events.push_back("remove: cluster " + std::to_string(c) + " (size " +
                             std::to_string(sizes[c]) + ")");
  }

  // Compress surviving centroids and remap labels.
  std::vector<int> remap(k, -1);
  int next = 0;
  for (int c = 0; c < k; ++c)
    if (survivor[c]) remap[c] = next++;
  kern.keep_centroids(survivor);
  for (auto& label : z) label = remap[label];
  k = next;
  model.k = k;

  // Fine-tune: one centering + assignment pass on the survivors.
  LloydState<Kernel> st(kern, k);
  st.adopt(z);
  st.iterate(0x46494e45ull, /*allow_reseed=*/false);
  z = st.assignment();
  model.post_trace = st.trace();
  for (auto& e : st.events()) model.events.push_back(e);

  // Drop clusters emptied by the fine-tune assignment.
  std::vector<int> final_sizes(k, 0);
  for (int c : z) ++final_sizes[c];
  std::vector<char> keep(k, 0);
  std::vector<int> remap2(k, -1);
  int w = 0;
  for (int c = 0; c < k; ++c) {
    if (final_sizes[c] > 0) {
      keep[c] = 1;
      remap2[c] = w++;
    }
  }
  if (w != k) {
    kern.keep_centroids(keep);
    for (auto& label : z) label = remap2[label];
    model.k = w;
    model.events.push_back("drop_empty: " + std::to_string(k - w) + " cluster(s)");
  }
}

/// Pipelines cap the removal threshold so the rule cannot erase every
/// cluster on tiny levels; the standalone post-processing op keeps the
/// strict contract and errors instead.
int pipeline_remove_eps(const LevelClusterModel& model, int remove_eps) {
  std::vector<int> sizes(std::max(model.k, 1), 0);
  for (int c : model.assignment) ++sizes[c];
  int max_size = 0;
  for (int s : sizes) max_size = std::max(max_size, s);
  return std::min(remove_eps, std::max(0, max_size - 1));
}

std::vector<std::pair<int, int>> level_items(const HtsDataset& ds, int level) {
  std::vector<std::pair<int, int>> items;
  for (const auto& e : level_series(ds, level)) items.emplace_back(e.instance, e.node);
  return items;
}

int mean_child_count(const HtsDataset& ds, int level) {
  long long total = 0, nodes = 0;
  for (const auto& inst : ds.instances) {
    for (int i = 0; i < inst.hierarchy.node_count; ++i) {
      if (inst.hierarchy.level_of[i] == level) {
        total += static_cast<long long>(inst.hierarchy.children_of[i].size());
        ++nodes;
      }
    }
  }
  if (nodes == 0) return 1;
  return static_cast<int>((total + nodes - 1) / nodes);  // ceil of the mean
}

std::vector<MaterializedMeasure> materialize(const std::vector<DiscreteMeasure>& ms,
                                             const AtomRegistry& reg) {
  std::vector<MaterializedMeasure> out;
  out.reserve(ms.size());
  for (const auto& m : ms) {
    MaterializedMeasure mm;
    mm.weights = m.weights;
    for (std::size_t id : m.atoms) mm.atoms.push_back(reg.atom(id));
    out.push_back(std::move(mm));
  }
  return out;
}

int require_k(const ClusterConfig& cfg, int level) {
  auto it = cfg.k_per_level.find(level);
  if (it == cfg.k_per_level.end())
    throw DataError("k_per_level does not cover level " + std::to_string(level));
  if (it->second < 1) throw DataError("k must be >= 1");
  return it->second;
}

long long ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

LevelClusterModel cluster_bottom_level(const std::vector<const TimeSeries*>& series,
                                       int k, const ClusterConfig& cfg, Rng& rng) {
  BottomKernel kern(series, cfg);
  LevelClusterModel model = run_lloyd(kern, k, cfg, rng);
  model.items.resize(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) model.items[i] = {0, static_cast<int>(i)};
  model.raw_means = kern.centroids();
  return model;
}

std::vector<DiscreteMeasure> lift_to_measures(const HtsDataset& ds, int level,
                                              const LevelClusterModel& lower,
                                              AtomRegistry& reg) {
  if (lower.level != level + 1)
    throw DataError("lift_to_measures: lower model is not one level below");
  std::vector<std::size_t> atom_ids;
  atom_ids.reserve(lower.raw_means.size());
  for (const auto& mean : lower.raw_means) atom_ids.push_back(reg.add(mean));

  std::map<std::pair<int, int>, int> lower_index;
  for (std::size_t i = 0; i < lower.items.size(); ++i)
    lower_index.emplace(lower.items[i], static_cast<int>(i));

  std::vector<DiscreteMeasure> out;
  for (const auto& e : level_series(ds, level)) {
    const auto& children = ds.instances[e.instance].hierarchy.children_of[e.node];
    std::vector<int> counts(lower.raw_means.size(), 0);
    for (int child : children) {
      auto it = lower_index.find({e.instance, child});
      if (it == lower_index.end())
        throw DataError("lift_to_measures: child not covered by the lower model");
      ++counts[lower.assignment[it->second]];
    }
    DiscreteMeasure m;
    const double total = static_cast<double>(children.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0) continue;
      m.atoms.push_back(atom_ids[c]);
      m.weights.push_back(static_cast<double>(counts[c]) / total);
    }
    out.push_back(std::move(m));
  }
  return out;
}

LevelClusterModel cluster_aggregated_level(const std::vector<DiscreteMeasure>& measures,
                                           int k, int support_size,
                                           const ClusterConfig& cfg, AtomRegistry& reg,
                                           Rng& rng) {
  MeasureKernel kern(measures, reg, cfg, support_size, rng.next_u64());
  LevelClusterModel model = run_lloyd(kern, k, cfg, rng);
  model.items.resize(measures.size());
  for (std::size_t i = 0; i < measures.size(); ++i) model.items[i] = {0, static_cast<int>(i)};
  model.barycenters = materialize(kern.centroids(), reg);
  return model;
}

std::vector<TimeSeries> refine_level_means(const HtsDataset& ds, int level,
                                           const LevelClusterModel& model,
                                           const ClusterConfig& cfg, Rng& rng) {
  auto entries = level_series(ds, level);
  if (entries.size() != model.assignment.size())
    throw DataError("refine_level_means: model does not cover the level");
  std::vector<std::vector<const TimeSeries*>> members(model.k);
  for (std::size_t i = 0; i < entries.size(); ++i)
    members[model.assignment[i]].push_back(entries[i].series);

  std::vector<std::uint64_t> seeds(model.k);
  for (int c = 0; c < model.k; ++c) seeds[c] = rng.next_u64();

  std::vector<TimeSeries> means(model.k);
  parallel_for(model.k, [&](std::size_t c) {
    if (members[c].empty()) {
      // Inert placeholder; nothing references an empty cluster's mean.
      if (!model.barycenters.empty() && !model.barycenters[c].atoms.empty())
        means[c] = model.barycenters[c].atoms.front();
      return;
    }
    Rng local(seeds[c]);
    std::size_t init = choose_mean_init(members[c], cfg.sdtw, local);
    MeanResult res = sdtw_mean(members[c], *members[c][init], cfg.sdtw, cfg.mean);
    means[c] = std::move(res.mean);
    means[c].id = "mean-l" + std::to_string(level) + "-c" + std::to_string(c);
  });
  return means;
}

void merge_remove_postprocess(LevelClusterModel& model,
                              const std::vector<const TimeSeries*>& series,
                              double merge_eps, int remove_eps,
                              const ClusterConfig& cfg) {
  BottomKernel kern(series, cfg);
  kern.resize_centroids(model.raw_means.size());
  for (std::size_t c = 0; c < model.raw_means.size(); ++c)
    kern.set_centroid(c, model.raw_means[c]);
  apply_merge_remove(kern, model, merge_eps, remove_eps);
  model.raw_means = kern.centroids();
}

void merge_remove_postprocess(LevelClusterModel& model,
                              const std::vector<DiscreteMeasure>& measures,
                              int support_size, double merge_eps, int remove_eps,
                              const ClusterConfig& cfg, AtomRegistry& reg, Rng& rng) {
  MeasureKernel kern(measures, reg, cfg, support_size, rng.next_u64());
  kern.resize_centroids(model.barycenters.size());
  for (std::size_t c = 0; c < model.barycenters.size(); ++c) {
    DiscreteMeasure m;
    m.weights = model.barycenters[c].weights;
    for (const auto& atom : model.barycenters[c].atoms) m.atoms.push_back(reg.add(atom));
    kern.set_centroid(c, std::move(m));
  }
  apply_merge_remove(kern, model, merge_eps, remove_eps);
  model.barycenters = materialize(kern.centroids(), reg);
}

ClusterRunResult cluster_hts(const HtsDataset& ds, const ClusterConfig& cfg) {
  if (auto r = validate_dataset(ds); !r) throw DataError("cluster_hts: " + r.violation);
  const int L = ds.levels;
  for (int l = 1; l <= L; ++l) require_k(cfg, l);

  ClusterRunResult out;
  out.model.mode = ClusterMode::multilevel;
  out.model.levels = L;
  out.model.config = cfg;
  AtomRegistry reg;

  // Bottom level: series K-means.
  auto t0 = std::chrono::steady_clock::now();
  auto entries = level_series(ds, L);
  std::vector<const TimeSeries*> series;
  series.reserve(entries.size());
  for (const auto& e : entries) series.push_back(e.series);
  BottomKernel bottom(series, cfg);
  Rng rng_bottom(derive_seed(cfg.seed, "seed-level", static_cast<std::uint64_t>(L)));
  LevelClusterModel model_bottom = run_lloyd(bottom, require_k(cfg, L), cfg, rng_bottom);
  model_bottom.level = L;
  model_bottom.items = level_items(ds, L);
  if (cfg.postprocess)
    apply_merge_remove(bottom, model_bottom, cfg.merge_eps,
                       pipeline_remove_eps(model_bottom, cfg.remove_eps));
  model_bottom.raw_means = bottom.centroids();
  out.level_wall_ms[L] = ms_since(t0);
  out.model.per_level.emplace(L, std::move(model_bottom));

  for (int l = L - 1; l >= 1; --l) {
    t0 = std::chrono::steady_clock::now();
    const LevelClusterModel& lower = out.model.per_level.at(l + 1);
    auto measures = lift_to_measures(ds, l, lower, reg);
    const int support = mean_child_count(ds, l);
    MeasureKernel kern(measures, reg, cfg, support,
                       derive_seed(cfg.seed, "bary-level", static_cast<std::uint64_t>(l)));
    Rng rng_level(derive_seed(cfg.seed, "seed-level", static_cast<std::uint64_t>(l)));
    LevelClusterModel model_l = run_lloyd(kern, require_k(cfg, l), cfg, rng_level);
    model_l.level = l;
    model_l.items = level_items(ds, l);
    if (cfg.postprocess)
      apply_merge_remove(kern, model_l, cfg.merge_eps,
                         pipeline_remove_eps(model_l, cfg.remove_eps));
    model_l.barycenters = materialize(kern.centroids(), reg);
    Rng rng_refine(derive_seed(cfg.seed, "refine", static_cast<std::uint64_t>(l)));
    model_l.raw_means = refine_level_means(ds, l, model_l, cfg, rng_refine);
    out.level_wall_ms[l] = ms_since(t0);
    out.model.per_level.emplace(l, std::move(model_l));
  }
  return out;
}

namespace {

/// Measures for the parents at `level` from an in-progress bottom state.
std::vector<DiscreteMeasure> lift_from_state(
    const HtsDataset& ds, int level, const std::vector<std::pair<int, int>>& child_items,
    const std::vector<int>& child_assignment, const std::vector<TimeSeries>& child_means,
    AtomRegistry& reg) {
  LevelClusterModel tmp;
  tmp.level = level + 1;
  tmp.k = static_cast<int>(child_means.size());
  tmp.items = child_items;
  tmp.assignment = child_assignment;
  tmp.raw_means = child_means;
  return lift_to_measures(ds, level, tmp, reg);
}

}  // namespace

ClusterRunResult two_level_alternating(const HtsDataset& ds, int k_top, int k_bottom,
                                       const ClusterConfig& cfg) {
  if (auto r = validate_dataset(ds); !r)
    throw DataError("two_level_alternating: " + r.violation);
  if (ds.levels != 2)
    throw DataError("two_level_alternating: dataset must have exactly 2 levels");

  ClusterRunResult out;
  out.model.mode = ClusterMode::two_level_alt;
  out.model.levels = 2;
  out.model.config = cfg;
  out.model.config.k_per_level = {{1, k_top}, {2, k_bottom}};
  AtomRegistry reg;

  auto t0 = std::chrono::steady_clock::now();
  auto bottom_entries = level_series(ds, 2);
  std::vector<const TimeSeries*> series;
  for (const auto& e : bottom_entries) series.push_back(e.series);
  auto bottom_items = level_items(ds, 2);
  // With one root per instance, the parent's top item index is the instance.
  std::vector<int> instance_of(bottom_items.size());
  for (std::size_t i = 0; i < bottom_items.size(); ++i)
    instance_of[i] = bottom_items[i].first;

  BottomKernel kb(series, cfg);
  LloydState<BottomKernel> sb(kb, k_bottom);
  Rng rng_b(derive_seed(cfg.seed, "seed-level", 2));
  sb.seed(rng_b);

  auto measures = lift_from_state(ds, 1, bottom_items, sb.assignment(), kb.centroids(), reg);
  const int support = mean_child_count(ds, 1);
  MeasureKernel kt(std::move(measures), reg, cfg, support,
                   derive_seed(cfg.seed, "bary-level", 1));
  LloydState<MeasureKernel> st(kt, k_top);
  Rng rng_t(derive_seed(cfg.seed, "seed-level", 1));
  st.seed(rng_t);

  for (int outer = 0; outer < cfg.max_outer_iter; ++outer) {
    const std::uint64_t tag = static_cast<std::uint64_t>(outer) + 1;
    bool b_changed = sb.iterate(tag);

    kt.replace_items(
        lift_from_state(ds, 1, bottom_items, sb.assignment(), kb.centroids(), reg));
    st.refresh_items();
    bool t_changed = st.iterate(tag);

    // Boundary calibration: a bottom series nearly tied between its two
    // nearest centroids moves to the one better represented among bottom
    // series whose parents share its top cluster. The batch only applies
    // when it does not increase the bottom loss.
    bool calibrated = false;
    if (k_bottom >= 2) {
      std::vector<std::pair<std::size_t, int>> moves;
      double delta = 0.0;
      for (std::size_t i = 0; i < bottom_items.size(); ++i) {
        int c1 = 0;
        for (int c = 1; c < k_bottom; ++c)
          if (sb.distances()(i, c) < sb.distances()(i, c1)) c1 = c;
        int c2 = c1 == 0 ? 1 : 0;
        for (int c = 0; c < k_bottom; ++c) {
          if (c == c1) continue;
          if (sb.distances()(i, c) < sb.distances()(i, c2)) c2 = c;
        }
        double d1 = sb.distances()(i, c1);
        double d2 = sb.distances()(i, c2);
        double ratio = d2 > 0.0 ? d1 / d2 : 1.0;
        if (ratio <= cfg.boundary_ratio) continue;
        int g = st.assignment()[instance_of[i]];
        int n1 = 0, n2 = 0;
        for (std::size_t j = 0; j < bottom_items.size(); ++j) {
          if (st.assignment()[instance_of[j]] != g) continue;
          if (sb.assignment()[j] == c1) ++n1;
          if (sb.assignment()[j] == c2) ++n2;
        }
        int choice = n1 >= n2 ? c1 : c2;
        if (choice != sb.assignment()[i]) {
          moves.emplace_back(i, choice);
          delta += sb.distances()(i, choice) - sb.distances()(i, sb.assignment()[i]);
        }
      }
      if (!moves.empty() && delta <= 0.0) {
        for (auto [i, c] : moves) sb.assignment()[i] = c;
        sb.trace().push_back(std::min(sb.loss(), sb.trace().back()));
        sb.events().push_back("calibration: moved " + std::to_string(moves.size()) +
                              " boundary series");
        calibrated = true;
      }
    }

    if (!b_changed && !t_changed && !calibrated) break;
  }

  // Assemble models; post-process bottom first, then rebuild the top's
  // measures so its post-processing sees the final bottom state.
  LevelClusterModel bottom_model;
  bottom_model.level = 2;
  bottom_model.k = k_bottom;
  bottom_model.items = bottom_items;
  bottom_model.assignment = sb.assignment();
  bottom_model.loss_trace = sb.trace();
  bottom_model.events = sb.events();
  if (cfg.postprocess)
    apply_merge_remove(kb, bottom_model, cfg.merge_eps,
                       pipeline_remove_eps(bottom_model, cfg.remove_eps));
  bottom_model.raw_means = kb.centroids();

  kt.replace_items(lift_from_state(ds, 1, bottom_items, bottom_model.assignment,
                                   bottom_model.raw_means, reg));
  st.refresh_items();
  LevelClusterModel top_model;
  top_model.level = 1;
  top_model.k = k_top;
  top_model.items = level_items(ds, 1);
  top_model.assignment = st.assignment();
  top_model.loss_trace = st.trace();
  top_model.events = st.events();
  if (cfg.postprocess)
    apply_merge_remove(kt, top_model, cfg.merge_eps,
                       pipeline_remove_eps(top_model, cfg.remove_eps));
  top_model.barycenters = materialize(kt.centroids(), reg);
  Rng rng_refine(derive_seed(cfg.seed, "refine", 1));
  top_model.raw_means = refine_level_means(ds, 1, top_model, cfg, rng_refine);

  out.level_wall_ms[2] = ms_since(t0);
  out.level_wall_ms[1] = 0;
  out.model.per_level.emplace(2, std::move(bottom_model));
  out.model.per_level.emplace(1, std::move(top_model));
  return out;
}

ClusterRunResult cluster_levelwise(const HtsDataset& ds, const ClusterConfig& cfg) {
  if (auto r = validate_dataset(ds); !r)
    throw DataError("cluster_levelwise: " + r.violation);
  ClusterRunResult out;
  out.model.mode = ClusterMode::levelwise;
  out.model.levels = ds.levels;
  out.model.config = cfg;
  for (int l = ds.levels; l >= 1; --l) {
    auto t0 = std::chrono::steady_clock::now();
    auto entries = level_series(ds, l);
    std::vector<const TimeSeries*> series;
    for (const auto& e : entries) series.push_back(e.series);
    BottomKernel kern(series, cfg);
    Rng rng(derive_seed(cfg.seed, "seed-level", static_cast<std::uint64_t>(l)));
    LevelClusterModel model = run_lloyd(kern, require_k(cfg, l), cfg, rng);
    model.level = l;
    model.items = level_items(ds, l);
    if (cfg.postprocess)
      apply_merge_remove(kern, model, cfg.merge_eps,
                         pipeline_remove_eps(model, cfg.remove_eps));
    model.raw_means = kern.centroids();
    out.level_wall_ms[l] = ms_since(t0);
    out.model.per_level.emplace(l, std::move(model));
  }
  return out;
}

ObjectiveBreakdown objective_value(const HtsDataset& ds,
                                   const MultiLevelClusterModel& model) {
  ObjectiveBreakdown out;
  const ClusterConfig& cfg = model.config;
  for (const auto& [level, lm] : model.per_level) {
    auto items = level_items(ds, level);
    if (items != lm.items)
      throw DataError("objective_value: model does not cover the dataset at level " +
                      std::to_string(level));
    double loss = 0.0;
    const bool series_space = model.mode == ClusterMode::levelwise || level == model.levels;
    if (series_space) {
      auto entries = level_series(ds, level);
      std::vector<double> per_item(entries.size());
      parallel_for(entries.size(), [&](std::size_t i) {
        per_item[i] =
            sdtw_divergence(*entries[i].series, lm.raw_means[lm.assignment[i]], cfg.sdtw);
      });
      for (double d : per_item) loss += d;
    } else {
      AtomRegistry reg;
      const LevelClusterModel& lower = model.per_level.at(level + 1);
      auto measures = lift_to_measures(ds, level, lower, reg);
      std::vector<DiscreteMeasure> centroids;
      for (const auto& mm : lm.barycenters) {
        DiscreteMeasure m;
        m.weights = mm.weights;
        for (const auto& atom : mm.atoms) m.atoms.push_back(reg.add(atom));
        centroids.push_back(std::move(m));
      }
      std::vector<double> per_item(measures.size());
      parallel_for(measures.size(), [&](std::size_t i) {
        per_item[i] = w_sdtw(measures[i], centroids[lm.assignment[i]], reg, cfg.sdtw, cfg.ot);
      });
      for (double d : per_item) loss += d;
    }
    out.per_level[level] = loss;
    out.total += loss;
  }
  return out;
}

}  // namespace htsc
