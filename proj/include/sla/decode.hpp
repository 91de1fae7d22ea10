#pragma once

#include <map>
#include <string>
#include <vector>

#include "sla/grade_scale.hpp"
#include "sla/matrix.hpp"
#include "sla/model.hpp"

namespace sla {

enum class DecodeMode { Hard, Soft, Reg };

std::string decode_mode_name(DecodeMode m);
DecodeMode decode_mode_from_name(const std::string& name);

/// Decoded scores for one response; the response score is the arithmetic
/// mean of its chunk scores. chunk_probs is empty for REG predictions.
struct PredictionRecord {
  std::string response_id;
  int part = 0;
  DecodeMode mode = DecodeMode::Soft;
  std::vector<double> chunk_scores;
  double response_score = 0.0;
  std::vector<std::vector<double>> chunk_probs;
};

/// Part scores and their mean for one submission.
struct SubmissionScore {
  std::string submission_id;
  std::map<int, double> part_scores;
  double overall = 0.0;
};

/// Score of the argmax class; ties go to the earlier label (higher score).
double decode_hard(const ClassDistribution& dist, const GradeScale& scale);

/// Probability-weighted mean of class scores.
double decode_soft(const ClassDistribution& dist, const GradeScale& scale);

/// Per-chunk decode then mean. Hard/soft require a CE or FA head; reg
/// requires the REG head. chunks holds one feature row per chunk.
PredictionRecord predict_response(const GraderModel& model,
                                  const Matrix& chunks, DecodeMode mode,
                                  std::string response_id = {}, int part = 0);

/// Part score = mean of its response scores; overall = mean over the
/// parts present (4-part protocols use a 4-part mean).
SubmissionScore score_submission(
    const std::map<int, std::vector<double>>& part_responses,
    std::string submission_id = {});

/// Class distributions for one externally-graded response, one per chunk.
struct IngestedResponse {
  std::string response_id;
  int part = 0;
  std::vector<ClassDistribution> chunk_dists;
};

/// Reads a tab-separated file of raw per-chunk logits
/// (response_id, part, chunk_index, C comma-separated logits), softmaxes
/// them, and groups by response in first-appearance order with chunks
/// ordered by index.
std::vector<IngestedResponse> ingest_logits(const std::string& path,
                                            const GradeScale& scale);

/// Clamp into [min_score, max_score]; applied only when exporting final
/// score reports, never before metric computation.
double clamp_for_export(double score, const GradeScale& scale);

}  // namespace sla
