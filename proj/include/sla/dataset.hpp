#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sla/grade_scale.hpp"

namespace sla {

/// One spoken response: where its feature chunks live and, when marked,
/// its reference score on the grade grid.
struct ResponseRecord {
  std::string submission_id;
  int part = 0;  // 1..5
  std::string response_id;
  std::vector<std::size_t> chunk_rows;  // row indices into the feature file
  std::optional<double> ref_score;
};

/// A named split (train/dev/test) whose records all index one feature file.
struct DatasetSplit {
  std::string name;
  std::string feature_file;
  std::vector<ResponseRecord> records;
};

/// A broken invariant found by validate_split; data, not an exception.
struct Violation {
  std::string response_id;
  std::string rule;
};

/// Checks every record invariant plus response_id uniqueness against a
/// feature file with `feature_count` rows. Empty result means valid.
std::vector<Violation> validate_split(const DatasetSplit& split,
                                      std::size_t feature_count,
                                      const GradeScale& scale);

}  // namespace sla
