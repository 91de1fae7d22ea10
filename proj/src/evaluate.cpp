#include "sla/evaluate.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "sla/error.hpp"
#include "sla/format.hpp"

namespace sla {

namespace {

struct Pairs {
  std::vector<double> preds;
  std::vector<double> refs;
};

}  // namespace

MetricReport evaluate(std::span<const ScoredItem> items,
                      Granularity granularity,
                      const std::map<int, CalibrationParams>& calibration,
                      const EvaluateOptions& options) {
  if (items.empty()) throw DomainError("evaluate: no scored items");

  std::vector<ScoredItem> work(items.begin(), items.end());
  if (!calibration.empty()) {
    for (auto& item : work) {
      auto it = calibration.find(item.part);
      if (it == calibration.end()) {
        throw DomainError("no calibration for part " +
                          std::to_string(item.part));
      }
      if (!options.allow_in_sample && !options.data_tag.empty() &&
          it->second.fitted_on == options.data_tag) {
        throw DomainError("calibration fitted on '" + it->second.fitted_on +
                          "' must not be evaluated in-sample");
      }
      item.pred = it->second.slope * item.pred + it->second.intercept;
    }
  }

  Pairs pairs;
  if (granularity == Granularity::Response) {
    for (const auto& item : work) {
      pairs.preds.push_back(item.pred);
      pairs.refs.push_back(item.ref);
    }
  } else {
    // part level: mean over responses in (submission, part)
    std::map<std::pair<std::string, int>, Pairs> parts;
    for (const auto& item : work) {
      auto& slot = parts[{item.submission_id, item.part}];
      slot.preds.push_back(item.pred);
      slot.refs.push_back(item.ref);
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    if (granularity == Granularity::Part) {
      for (const auto& [key, slot] : parts) {
        pairs.preds.push_back(mean(slot.preds));
        pairs.refs.push_back(mean(slot.refs));
      }
    } else {
      // submission level: mean of part means
      std::map<std::string, Pairs> subs;
      for (const auto& [key, slot] : parts) {
        subs[key.first].preds.push_back(mean(slot.preds));
        subs[key.first].refs.push_back(mean(slot.refs));
      }
      for (const auto& [id, part_pairs] : subs) {
        pairs.preds.push_back(mean(part_pairs.preds));
        pairs.refs.push_back(mean(part_pairs.refs));
      }
    }
  }

  MetricReport report;
  report.granularity = granularity;
  report.n = pairs.preds.size();
  report.rmse = rmse(pairs.preds, pairs.refs);
  report.pcc = pcc(pairs.preds, pairs.refs);
  report.src = src(pairs.preds, pairs.refs);
  return report;
}

std::vector<PredictionRecord> predict_split(const GraderModel& model,
                                            const SplitData& data,
                                            DecodeMode mode, int part_filter) {
  std::vector<PredictionRecord> out;
  const Matrix features = widen(data.features);
  for (const auto& rec : data.split.records) {
    if (part_filter != 0 && rec.part != part_filter) continue;
    Matrix chunks(rec.chunk_rows.size(), features.cols);
    for (std::size_t i = 0; i < rec.chunk_rows.size(); ++i) {
      if (rec.chunk_rows[i] >= features.rows) {
        throw DomainError("record '" + rec.response_id + "' chunk row " +
                          std::to_string(rec.chunk_rows[i]) +
                          " out of bounds");
      }
      auto src_row = features.row(rec.chunk_rows[i]);
      std::copy(src_row.begin(), src_row.end(), chunks.row(i).begin());
    }
    out.push_back(
        predict_response(model, chunks, mode, rec.response_id, rec.part));
  }
  return out;
}

std::vector<ScoredItem> join_items(std::span<const PredictionRecord> preds,
                                   const DatasetSplit& split) {
  std::unordered_map<std::string, const ResponseRecord*> by_id;
  for (const auto& rec : split.records) by_id[rec.response_id] = &rec;
  std::vector<ScoredItem> items;
  items.reserve(preds.size());
  for (const auto& p : preds) {
    auto it = by_id.find(p.response_id);
    if (it == by_id.end()) {
      throw DomainError("prediction id '" + p.response_id +
                        "' not found in manifest");
    }
    const ResponseRecord& rec = *it->second;
    if (!rec.ref_score) {
      throw DomainError("prediction id '" + p.response_id +
                        "' has no reference score");
    }
    items.push_back({rec.submission_id, rec.part, rec.response_id,
                     p.response_score, *rec.ref_score});
  }
  return items;
}

namespace {

std::string part_dev_tag(int part) {
  return "dev:part" + std::to_string(part);
}

CalibrationParams fit_part_calibration(const GraderModel& model,
                                       const PartDatasets& data, int part,
                                       DecodeMode mode) {
  if (data.dev.split.records.empty()) {
    throw DomainError("missing dev split for part " + std::to_string(part));
  }
  auto dev_preds = predict_split(model, data.dev, mode, part);
  auto dev_items = join_items(dev_preds, data.dev.split);
  std::vector<double> p, r;
  for (const auto& item : dev_items) {
    p.push_back(item.pred);
    r.push_back(item.ref);
  }
  return fit_calibration(p, r, part_dev_tag(part));
}

}  // namespace

CrossPartResult cross_part_matrix(const std::map<int, GraderModel>& models,
                                  const std::map<int, PartDatasets>& datasets,
                                  DecodeMode mode) {
  if (models.empty() || datasets.empty()) {
    throw DomainError("cross_part_matrix needs models and datasets");
  }
  CrossPartResult result;
  for (const auto& [part, _] : models) result.model_parts.push_back(part);
  for (const auto& [part, _] : datasets) result.data_parts.push_back(part);
  result.pcc = Matrix(result.model_parts.size(), result.data_parts.size());

  for (std::size_t i = 0; i < result.model_parts.size(); ++i) {
    const GraderModel& model = models.at(result.model_parts[i]);
    for (std::size_t j = 0; j < result.data_parts.size(); ++j) {
      const int part = result.data_parts[j];
      const PartDatasets& data = datasets.at(part);
      auto calib = fit_part_calibration(model, data, part, mode);
      auto preds = predict_split(model, data.test, mode, part);
      auto items = join_items(preds, data.test.split);
      EvaluateOptions opts;
      opts.data_tag = "test:part" + std::to_string(part);
      auto report = evaluate(items, Granularity::Response, {{part, calib}},
                             opts);
      result.pcc.at(i, j) = report.pcc;
    }
  }
  return result;
}

MetricReport cross_task_eval(const std::map<int, GraderModel>& models,
                             const std::map<int, PartDatasets>& datasets,
                             const std::vector<int>& parts, DecodeMode mode) {
  if (parts.empty()) throw DomainError("cross_task_eval: empty part subset");
  std::vector<ScoredItem> items;
  std::map<int, CalibrationParams> calibration;
  for (int part : parts) {
    auto mit = models.find(part);
    auto dit = datasets.find(part);
    if (mit == models.end() || dit == datasets.end()) {
      throw DomainError("part " + std::to_string(part) +
                        " missing from models or datasets");
    }
    calibration[part] = fit_part_calibration(mit->second, dit->second, part,
                                             mode);
    auto preds = predict_split(mit->second, dit->second.test, mode, part);
    auto part_items = join_items(preds, dit->second.test.split);
    items.insert(items.end(), part_items.begin(), part_items.end());
  }
  EvaluateOptions opts;
  opts.data_tag = "test:cross-task";
  return evaluate(items, Granularity::Submission, calibration, opts);
}

namespace {

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_report(std::span<const NamedReport> reports) {
  std::size_t name_width = 4;  // "name"
  for (const auto& r : reports) name_width = std::max(name_width, r.name.size());
  std::ostringstream out;
  out << pad("name", name_width) << "  " << pad("granularity", 11) << "  "
      << pad("n", 6) << "  " << pad("RMSE", 6) << "  " << pad("PCC", 6)
      << "  " << pad("SRC", 6) << '\n';
  for (const auto& r : reports) {
    out << pad(r.name, name_width) << "  "
        << pad(granularity_name(r.report.granularity), 11) << "  "
        << pad(std::to_string(r.report.n), 6) << "  "
        << pad(format_fixed(r.report.rmse, 3), 6) << "  "
        << pad(format_fixed(r.report.pcc, 3), 6) << "  "
        << pad(format_fixed(r.report.src, 3), 6) << '\n';
  }
  return out.str();
}

std::string render_report_tsv(std::span<const NamedReport> reports) {
  std::ostringstream out;
  out << "name\tgranularity\tn\trmse\tpcc\tsrc\n";
  for (const auto& r : reports) {
    out << r.name << '\t' << granularity_name(r.report.granularity) << '\t'
        << r.report.n << '\t' << format_f6(r.report.rmse) << '\t'
        << format_f6(r.report.pcc) << '\t' << format_f6(r.report.src) << '\n';
  }
  return out.str();
}

std::string render_matrix(const CrossPartResult& result) {
  std::ostringstream out;
  out << pad("model\\data", 10);
  for (int part : result.data_parts) out << "  " << pad("P" + std::to_string(part), 6);
  out << '\n';
  for (std::size_t i = 0; i < result.model_parts.size(); ++i) {
    out << pad("P" + std::to_string(result.model_parts[i]), 10);
    for (std::size_t j = 0; j < result.data_parts.size(); ++j) {
      out << "  " << pad(format_fixed(result.pcc.at(i, j), 3), 6);
    }
    out << '\n';
  }
  return out.str();
}

std::string render_matrix_tsv(const CrossPartResult& result) {
  std::ostringstream out;
  out << "model_part";
  for (int part : result.data_parts) out << "\tp" << part;
  out << '\n';
  for (std::size_t i = 0; i < result.model_parts.size(); ++i) {
    out << result.model_parts[i];
    for (std::size_t j = 0; j < result.data_parts.size(); ++j) {
      out << '\t' << format_f6(result.pcc.at(i, j));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace sla
