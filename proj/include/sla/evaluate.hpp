#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "sla/calibrate.hpp"
#include "sla/dataset.hpp"
#include "sla/decode.hpp"
#include "sla/matrix.hpp"
#include "sla/metrics.hpp"
#include "sla/model.hpp"

namespace sla {

/// One prediction joined with its reference and grouping keys.
struct ScoredItem {
  std::string submission_id;
  int part = 0;
  std::string response_id;
  double pred = 0.0;
  double ref = 0.0;
};

struct EvaluateOptions {
  /// Provenance tag of the data being evaluated; when it matches a
  /// calibration's fitted_on, evaluation refuses unless allowed below.
  std::string data_tag;
  bool allow_in_sample = false;
};

/// Applies per-part calibration (empty map = none), aggregates to the
/// requested granularity, and computes RMSE/PCC/SRC. Metrics always run
/// on unclamped values.
MetricReport evaluate(std::span<const ScoredItem> items,
                      Granularity granularity,
                      const std::map<int, CalibrationParams>& calibration = {},
                      const EvaluateOptions& options = {});

/// A split together with its feature matrix, ready for prediction.
struct SplitData {
  DatasetSplit split;
  FloatMatrix features;
};

/// Runs a model over every record of a split (optionally one part only;
/// part_filter 0 = all parts).
std::vector<PredictionRecord> predict_split(const GraderModel& model,
                                            const SplitData& data,
                                            DecodeMode mode,
                                            int part_filter = 0);

/// Joins predictions with the split's references; DomainError naming the
/// first prediction whose id is missing or unreferenced.
std::vector<ScoredItem> join_items(std::span<const PredictionRecord> preds,
                                   const DatasetSplit& split);

struct PartDatasets {
  SplitData dev;
  SplitData test;
};

/// PCC of (model trained on part i) calibrated on part j's dev and
/// evaluated on part j's test; rows follow the model map, columns the
/// dataset map. The diagonal is the matched setup.
struct CrossPartResult {
  std::vector<int> model_parts;
  std::vector<int> data_parts;
  Matrix pcc;  // model_parts.size() x data_parts.size()
};

CrossPartResult cross_part_matrix(const std::map<int, GraderModel>& models,
                                  const std::map<int, PartDatasets>& datasets,
                                  DecodeMode mode);

/// Cross-task protocol: per-part prediction with the target task's dev
/// calibration, submission-level averaging over the part subset.
MetricReport cross_task_eval(const std::map<int, GraderModel>& models,
                             const std::map<int, PartDatasets>& datasets,
                             const std::vector<int>& parts, DecodeMode mode);

/// A labelled metric row for report rendering.
struct NamedReport {
  std::string name;
  MetricReport report;
};

/// Deterministic fixed-width table; 3 decimals, round-half-even, columns
/// RMSE, PCC, SRC.
std::string render_report(std::span<const NamedReport> reports);
std::string render_report_tsv(std::span<const NamedReport> reports);

std::string render_matrix(const CrossPartResult& result);
std::string render_matrix_tsv(const CrossPartResult& result);

}  // namespace sla
