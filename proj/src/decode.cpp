#include "sla/decode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sla/error.hpp"
#include "sla/format.hpp"

namespace sla {

std::string decode_mode_name(DecodeMode m) {
  switch (m) {
    case DecodeMode::Hard: return "hard";
    case DecodeMode::Soft: return "soft";
    case DecodeMode::Reg: return "reg";
  }
  throw DomainError("invalid decode mode");
}

DecodeMode decode_mode_from_name(const std::string& name) {
  if (name == "hard") return DecodeMode::Hard;
  if (name == "soft") return DecodeMode::Soft;
  if (name == "reg") return DecodeMode::Reg;
  throw DomainError("unknown decode mode '" + name + "'");
}

double decode_hard(const ClassDistribution& dist, const GradeScale& scale) {
  check_distribution(dist);
  if (dist.probs.size() != scale.num_classes()) {
    throw DomainError("distribution length does not match class count");
  }
  // First maximum in label order = higher score on ties.
  std::size_t best = 0;
  for (std::size_t c = 1; c < dist.probs.size(); ++c) {
    if (dist.probs[c] > dist.probs[best]) best = c;
  }
  return scale.scores()[best];
}

double decode_soft(const ClassDistribution& dist, const GradeScale& scale) {
  check_distribution(dist);
  return expected_score(dist, scale);
}

PredictionRecord predict_response(const GraderModel& model,
                                  const Matrix& chunks, DecodeMode mode,
                                  std::string response_id, int part) {
  if (chunks.rows == 0) {
    throw DomainError("predict_response: response has no chunks");
  }
  const bool reg_head = model.head == HeadKind::REG;
  if ((mode == DecodeMode::Reg) != reg_head) {
    throw DomainError("decode mode '" + decode_mode_name(mode) +
                      "' incompatible with head '" +
                      head_kind_name(model.head) + "'");
  }
  PredictionRecord rec;
  rec.response_id = std::move(response_id);
  rec.part = part;
  rec.mode = mode;
  double sum = 0.0;
  for (std::size_t i = 0; i < chunks.rows; ++i) {
    auto out = forward(model, chunks.row(i));
    double score = 0.0;
    if (mode == DecodeMode::Reg) {
      score = out[0];
    } else {
      ClassDistribution dist = softmax(out);
      score = mode == DecodeMode::Hard ? decode_hard(dist, model.scale)
                                       : decode_soft(dist, model.scale);
      rec.chunk_probs.push_back(std::move(dist.probs));
    }
    rec.chunk_scores.push_back(score);
    sum += score;
  }
  rec.response_score = sum / static_cast<double>(chunks.rows);
  return rec;
}

SubmissionScore score_submission(
    const std::map<int, std::vector<double>>& part_responses,
    std::string submission_id) {
  if (part_responses.empty()) {
    throw DomainError("score_submission: no parts present");
  }
  SubmissionScore s;
  s.submission_id = std::move(submission_id);
  double total = 0.0;
  for (const auto& [part, scores] : part_responses) {
    if (scores.empty()) {
      throw DomainError("score_submission: part " + std::to_string(part) +
                        " has no response scores");
    }
    double sum = 0.0;
    for (double v : scores) sum += v;
    double part_score = sum / static_cast<double>(scores.size());
    s.part_scores[part] = part_score;
    total += part_score;
  }
  s.overall = total / static_cast<double>(s.part_scores.size());
  return s;
}

std::vector<IngestedResponse> ingest_logits(const std::string& path,
                                            const GradeScale& scale) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open logits file '" + path + "'");

  struct Entry {
    int chunk_index;
    ClassDistribution dist;
  };
  std::vector<std::string> order;
  std::map<std::string, int> parts;
  std::map<std::string, std::vector<Entry>> grouped;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, '\t');
    auto fail = [&](const std::string& why) -> FormatError {
      return FormatError(path + ":" + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 4) {
      throw fail("expected 4 tab-separated fields, got " +
                 std::to_string(fields.size()));
    }
    const std::string& id = fields[0];
    int part = parse_int(fields[1], "part");
    int chunk = parse_int(fields[2], "chunk index");
    auto raw = split(fields[3], ',');
    if (raw.size() != scale.num_classes()) {
      throw fail("expected " + std::to_string(scale.num_classes()) +
                 " logits, got " + std::to_string(raw.size()));
    }
    std::vector<double> logits(raw.size());
    for (std::size_t c = 0; c < raw.size(); ++c) {
      logits[c] = parse_double(raw[c], "logit");
    }

    auto [it, fresh] = grouped.try_emplace(id);
    if (fresh) {
      order.push_back(id);
      parts[id] = part;
    } else if (parts[id] != part) {
      throw fail("response '" + id + "' listed with conflicting parts");
    }
    for (const auto& e : it->second) {
      if (e.chunk_index == chunk) {
        throw fail("duplicate chunk " + std::to_string(chunk) +
                   " for response '" + id + "'");
      }
    }
    it->second.push_back({chunk, softmax(logits)});
  }

  std::vector<IngestedResponse> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    auto& entries = grouped[id];
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) {
                return a.chunk_index < b.chunk_index;
              });
    IngestedResponse r;
    r.response_id = id;
    r.part = parts[id];
    for (auto& e : entries) r.chunk_dists.push_back(std::move(e.dist));
    out.push_back(std::move(r));
  }
  return out;
}

double clamp_for_export(double score, const GradeScale& scale) {
  return std::min(std::max(score, scale.min_score()), scale.max_score());
}

}  // namespace sla
