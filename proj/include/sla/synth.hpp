#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sla/evaluate.hpp"
#include "sla/grade_scale.hpp"

namespace sla {

// Seeded synthetic-corpus generator. Each submission draws a latent
// proficiency on the grade grid; every part projects it onto a signal
// direction blending one shared component with a part-specific one, so
// graders transfer across parts imperfectly. References are the latent
// score plus annotator noise, snapped back to the grid.
struct SynthConfig {
  std::size_t train_submissions = 2000;
  std::size_t dev_submissions = 400;
  std::size_t test_submissions = 400;
  std::vector<int> parts = {1, 2, 3, 4, 5};
  std::map<int, int> chunks_per_part = {{3, 2}, {4, 2}};  // others 1
  std::size_t dim = 16;
  double shared_weight = 0.8;    // alpha
  double part_weight = 0.6;      // beta
  double feature_noise = 0.12;   // sigma_f, per feature dimension
  double annotator_noise = 0.2;  // sigma_a, on the latent score
  std::uint64_t seed = 0;
  /// When set, signal directions derive from this seed instead of `seed`,
  /// letting two corpora ("tasks") share structure with fresh data.
  std::optional<std::uint64_t> direction_seed;
  GradeScale scale = GradeScale::six_level();

  int chunks_for(int part) const {
    auto it = chunks_per_part.find(part);
    return it == chunks_per_part.end() ? 1 : it->second;
  }
  void validate() const;
};

struct SynthCorpus {
  SplitData train;
  SplitData dev;
  SplitData test;
};

/// Deterministic in-memory corpus; same config (incl. seed) regenerates
/// bit-identically.
SynthCorpus generate(const SynthConfig& config);

/// Writes <dir>/{train,dev,test}.features.bin and .manifest.tsv.
void write_corpus(const SynthCorpus& corpus, const std::string& dir);

/// Human-readable summary of what a config generates.
std::string describe(const SynthConfig& config);

}  // namespace sla
