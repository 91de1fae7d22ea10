#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "sla/calibrate.hpp"
#include "sla/dataset.hpp"
#include "sla/decode.hpp"
#include "sla/matrix.hpp"
#include "sla/model.hpp"
#include "sla/train.hpp"

namespace sla {

// Binary feature file: magic "SLAF0001", count and dim as unsigned 32-bit
// little-endian, then count*dim binary32 little-endian values row-major.
void write_features(const FloatMatrix& rows, const std::string& path);
FloatMatrix read_features(const std::string& path);

// Manifest: tab-separated lines
//   submission_id  part  response_id  chunk_rows(,)  ref_score|-
// Lines beginning '#' are ignored. Split name and feature file default
// from the filename stem ("train.manifest.tsv" -> "train",
// sibling "train.features.bin").
DatasetSplit parse_manifest(const std::string& path,
                            const GradeScale& scale = GradeScale::six_level());
DatasetSplit parse_manifest(const std::string& path, std::string name,
                            std::string feature_file,
                            const GradeScale& scale = GradeScale::six_level());
void write_manifest(const DatasetSplit& split, const std::string& path);

// Model file: "SLAGRADER v1" header, key=value lines, then weight blocks
// with each scalar as a 16-hex-digit binary64. Bit-exact round trip.
struct LoadedModel {
  GraderModel model;
  std::map<std::string, std::string> meta;  // every header key=value
};
void save_model(const GraderModel& model, const std::string& path,
                const std::map<std::string, std::string>& extra_meta = {});
LoadedModel load_model(const std::string& path);

// Predictions: tab-separated lines
//   response_id  part  mode  score(6dp)  probs(,6dp)|-
// Multi-chunk probability vectors are written as the chunk mean.
void write_predictions(std::span<const PredictionRecord> records,
                       const std::string& path);
std::vector<PredictionRecord> read_predictions(const std::string& path);

// Calibration parameters, hex-encoded for bit-exactness with a decimal
// echo for inspection.
void save_calibration(const CalibrationParams& params,
                      const std::string& path);
CalibrationParams load_calibration(const std::string& path);

/// Per-step learning rate and loss, tab-separated, plus epoch means.
void write_trainlog(const TrainLog& log, const std::string& path);

}  // namespace sla
