#pragma once

#include <deque>
#include <span>
#include <vector>

#include "vrer/gradients.hpp"
#include "vrer/rng.hpp"

namespace vrer::reuse {

using gradients::Sample;
using gradients::SnapshotGroup;
using net::Vec;
using policy::Policy;
using policy::PolicySnapshot;

// The n samples generated under one policy snapshot.
struct GenerationRecord {
  PolicySnapshot snapshot;
  std::vector<Sample> samples;
};

// Circular buffer of generation records ordered by iteration; insertion
// past capacity evicts the oldest record.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);  // capacity 0 means unbounded

  void insert(GenerationRecord record);

  int capacity() const { return capacity_; }
  size_t size() const { return entries_.size(); }
  const GenerationRecord& entry(size_t i) const { return entries_[i]; }
  const std::deque<GenerationRecord>& entries() const { return entries_; }

 private:
  int capacity_;
  std::deque<GenerationRecord> entries_;
};

enum class SelectionRule { rule1, rule2, rule3 };

struct SelectionConfig {
  SelectionRule rule = SelectionRule::rule2;
  double c = 1.5;      // variance-inflation threshold, rules 1-2
  int n0 = 4;          // subsample size per selected snapshot
  bool resample = true;  // false: reuse each record's samples verbatim

  void validate() const;
};

struct ReuseSet {
  std::vector<int> selected_iterations;  // buffer order; always holds current
  int disqualified = 0;                  // snapshots dropped for non-finite ratios
};

// Rule 1 (exact variance comparison, episode-based): snapshot i is selected
// iff the sample variance trace of its ratio-weighted scenario gradients is
// at most c times the trace of the new samples' scenario gradients.
ReuseSet select_rule1(const ReplayBuffer& buffer, const Policy& pol, const Vec& params,
                      std::span<const Sample> new_samples, int current_iteration,
                      double c, const gradients::EstimatorConfig& est);

// Rule 2 (first-order variance-ratio approximation, episode-based), using
// nu(x) = (theta_k - theta_i)' sum_t score(s_t, a_t) over the new samples only.
ReuseSet select_rule2(const ReplayBuffer& buffer, const Policy& pol, const Vec& params,
                      std::span<const Sample> new_samples, int current_iteration,
                      double c, const gradients::EstimatorConfig& est);

// Rule 3 (single-scenario approximation, step-based): selected iff
// exp(nu_bar + nu_bar^2) <= 1 with nu_bar averaged over the new transitions.
ReuseSet select_rule3(const ReplayBuffer& buffer, const Policy& pol, const Vec& params,
                      std::span<const Sample> new_samples, int current_iteration);

// Draws n0 samples per selected snapshot with replacement (or passes each
// record through verbatim when resample is off). Groups come out in buffer
// order so downstream reductions are deterministic.
std::vector<SnapshotGroup> subsample_pool(const ReplayBuffer& buffer,
                                          const ReuseSet& selected,
                                          const SelectionConfig& cfg, RngStream& rng);

}  // namespace vrer::reuse
