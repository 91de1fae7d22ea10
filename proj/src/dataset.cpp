#include "sla/dataset.hpp"

#include <set>
#include <unordered_set>

namespace sla {

std::vector<Violation> validate_split(const DatasetSplit& split,
                                      std::size_t feature_count,
                                      const GradeScale& scale) {
  std::vector<Violation> out;
  std::unordered_set<std::string> seen_ids;
  for (const auto& rec : split.records) {
    if (!seen_ids.insert(rec.response_id).second) {
      out.push_back({rec.response_id, "duplicate response_id"});
    }
    if (rec.part < 1 || rec.part > 5) {
      out.push_back({rec.response_id,
                     "part " + std::to_string(rec.part) + " outside 1..5"});
    }
    if (rec.chunk_rows.empty()) {
      out.push_back({rec.response_id, "empty chunk_rows"});
    }
    std::set<std::size_t> rows;
    for (std::size_t row : rec.chunk_rows) {
      if (!rows.insert(row).second) {
        out.push_back({rec.response_id,
                       "duplicate chunk row " + std::to_string(row)});
      }
      if (row >= feature_count) {
        out.push_back({rec.response_id,
                       "chunk row " + std::to_string(row) +
                           " out of bounds (feature count " +
                           std::to_string(feature_count) + ")"});
      }
    }
    if (rec.ref_score && !scale.on_grid(*rec.ref_score)) {
      out.push_back({rec.response_id,
                     "reference score " + std::to_string(*rec.ref_score) +
                         " not on the grade grid"});
    }
  }
  return out;
}

}  // namespace sla
