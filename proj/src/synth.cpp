#include "sla/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "sla/error.hpp"
#include "sla/rng.hpp"
#include "sla/storage.hpp"

namespace sla {

void SynthConfig::validate() const {
  if (dim < 2) throw DomainError("synth dim must be >= 2");
  if (parts.empty()) throw DomainError("synth parts must be non-empty");
  std::set<int> seen;
  for (int p : parts) {
    if (p < 1 || p > 5) {
      throw DomainError("synth part " + std::to_string(p) + " outside 1..5");
    }
    if (!seen.insert(p).second) {
      throw DomainError("duplicate synth part " + std::to_string(p));
    }
  }
  for (const auto& [part, n] : chunks_per_part) {
    if (n < 1) throw DomainError("chunks per part must be >= 1");
  }
  if (shared_weight * shared_weight + part_weight * part_weight <= 0.0) {
    throw DomainError("shared_weight and part_weight cannot both be 0");
  }
  if (feature_noise < 0.0 || annotator_noise < 0.0) {
    throw DomainError("noise levels must be >= 0");
  }
}

namespace {

constexpr std::uint64_t kDirectionStream = 0x64697273ull;  // "dirs"
constexpr std::uint64_t kSplitStream = 0x73706c74ull;      // "splt"

std::vector<double> random_unit(SplitMix64& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : v) {
      x = rng.next_gaussian();
      norm2 += x * x;
    }
  } while (norm2 < 1e-24);
  double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

// Part directions are orthogonalized against the shared direction and
// each other (while the dimension allows) so the alpha/beta blend sets
// the cross-part geometry exactly.
std::map<int, std::vector<double>> signal_directions(const SynthConfig& cfg) {
  SplitMix64 rng(SplitMix64::mix(cfg.direction_seed.value_or(cfg.seed),
                                 kDirectionStream));
  std::vector<std::vector<double>> basis;
  basis.push_back(random_unit(rng, cfg.dim));
  const std::vector<double> shared = basis.front();

  std::vector<int> parts = cfg.parts;
  std::sort(parts.begin(), parts.end());
  std::map<int, std::vector<double>> dirs;
  for (int part : parts) {
    std::vector<double> u = random_unit(rng, cfg.dim);
    std::vector<double> ortho = u;
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t i = 0; i < cfg.dim; ++i) dot += ortho[i] * b[i];
      for (std::size_t i = 0; i < cfg.dim; ++i) ortho[i] -= dot * b[i];
    }
    double norm2 = 0.0;
    for (double x : ortho) norm2 += x * x;
    if (norm2 > 1e-12) {
      double inv = 1.0 / std::sqrt(norm2);
      for (double& x : ortho) x *= inv;
      u = ortho;
      basis.push_back(u);
    }
    std::vector<double> v(cfg.dim);
    double norm = 0.0;
    for (std::size_t i = 0; i < cfg.dim; ++i) {
      v[i] = cfg.shared_weight * shared[i] + cfg.part_weight * u[i];
      norm += v[i] * v[i];
    }
    double inv = 1.0 / std::sqrt(norm);
    for (double& x : v) x *= inv;
    dirs[part] = std::move(v);
  }
  return dirs;
}

SplitData generate_split(const SynthConfig& cfg, const std::string& name,
                         std::size_t n_submissions, std::uint64_t split_index,
                         const std::map<int, std::vector<double>>& dirs) {
  SplitData data;
  data.split.name = name;
  data.split.feature_file = name + ".features.bin";

  std::vector<int> parts = cfg.parts;
  std::sort(parts.begin(), parts.end());
  std::size_t rows_per_sub = 0;
  for (int p : parts) rows_per_sub += static_cast<std::size_t>(cfg.chunks_for(p));
  data.features = FloatMatrix(n_submissions * rows_per_sub, cfg.dim);

  const double min_s = cfg.scale.min_score();
  const double max_s = cfg.scale.max_score();
  const double mid = 0.5 * (min_s + max_s);
  const double half_span = 0.5 * (max_s - min_s);
  const auto n_grid = static_cast<std::uint64_t>(
      std::round((max_s - min_s) / cfg.scale.grid_step())) + 1;

  SplitMix64 rng(SplitMix64::mix(SplitMix64::mix(cfg.seed, kSplitStream),
                                 split_index));
  std::size_t row = 0;
  for (std::size_t s = 0; s < n_submissions; ++s) {
    char sub_id[32];
    std::snprintf(sub_id, sizeof(sub_id), "%s-%05zu", name.c_str(), s);
    const double theta =
        min_s + static_cast<double>(rng.next_below(n_grid)) *
                    cfg.scale.grid_step();
    const double t = (theta - mid) / half_span;
    for (int part : parts) {
      ResponseRecord rec;
      rec.submission_id = sub_id;
      rec.part = part;
      rec.response_id = std::string(sub_id) + "-p" + std::to_string(part);
      double noisy = theta + cfg.annotator_noise * rng.next_gaussian();
      rec.ref_score = cfg.scale.snap_to_grid(
          std::min(std::max(noisy, min_s), max_s));
      const auto& v = dirs.at(part);
      for (int c = 0; c < cfg.chunks_for(part); ++c) {
        float* dst = data.features.data.data() + row * cfg.dim;
        for (std::size_t i = 0; i < cfg.dim; ++i) {
          dst[i] = static_cast<float>(t * v[i] +
                                      cfg.feature_noise * rng.next_gaussian());
        }
        rec.chunk_rows.push_back(row);
        ++row;
      }
      data.split.records.push_back(std::move(rec));
    }
  }
  return data;
}

}  // namespace

SynthCorpus generate(const SynthConfig& config) {
  config.validate();
  auto dirs = signal_directions(config);
  SynthCorpus corpus;
  corpus.train = generate_split(config, "train", config.train_submissions, 0,
                                dirs);
  corpus.dev = generate_split(config, "dev", config.dev_submissions, 1, dirs);
  corpus.test = generate_split(config, "test", config.test_submissions, 2,
                               dirs);
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const SplitData* data : {&corpus.train, &corpus.dev, &corpus.test}) {
    std::filesystem::path base(dir);
    write_features(data->features,
                   (base / (data->split.name + ".features.bin")).string());
    write_manifest(data->split,
                   (base / (data->split.name + ".manifest.tsv")).string());
  }
}

std::string describe(const SynthConfig& config) {
  config.validate();
  std::ostringstream out;
  out << "synthetic corpus: dim " << config.dim << ", seed " << config.seed;
  if (config.direction_seed) {
    out << ", direction seed " << *config.direction_seed;
  }
  out << "\n";
  out << "signal: shared " << config.shared_weight << ", part "
      << config.part_weight << "; feature noise " << config.feature_noise
      << ", annotator noise " << config.annotator_noise << "\n";
  std::vector<int> parts = config.parts;
  std::sort(parts.begin(), parts.end());
  std::size_t rows_per_sub = 0;
  out << "parts:";
  for (int p : parts) {
    int chunks = config.chunks_for(p);
    rows_per_sub += static_cast<std::size_t>(chunks);
    out << " " << p << " (" << chunks << (chunks == 1 ? " chunk)" : " chunks)");
  }
  out << "\n";
  struct SplitLine {
    const char* name;
    std::size_t subs;
  } lines[] = {{"train", config.train_submissions},
               {"dev", config.dev_submissions},
               {"test", config.test_submissions}};
  for (const auto& line : lines) {
    out << line.name << ": " << line.subs << " submissions, "
        << line.subs * parts.size() << " responses, "
        << line.subs * rows_per_sub << " feature rows";
    if (line.subs == 0) out << " (empty split)";
    out << "\n";
  }
  return out.str();
}

}  // namespace sla
