#include "sla/storage.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sla/error.hpp"
#include "sla/format.hpp"

namespace sla {

namespace {

constexpr char kFeatureMagic[9] = "SLAF0001";
constexpr char kModelHeader[] = "SLAGRADER v1";
constexpr char kCalibHeader[] = "SLACALIB v1";

void put_u32le(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32le(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

void write_features(const FloatMatrix& rows, const std::string& path) {
  if (rows.cols == 0) throw DomainError("feature dim must be >= 1");
  auto out = open_out(path, true);
  out.write(kFeatureMagic, 8);
  put_u32le(out, static_cast<std::uint32_t>(rows.rows));
  put_u32le(out, static_cast<std::uint32_t>(rows.cols));
  for (float f : rows.data) {
    put_u32le(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

FloatMatrix read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open feature file '" + path + "'");
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec) throw FormatError("cannot stat feature file '" + path + "'");
  unsigned char header[16];
  if (actual < 16 || !in.read(reinterpret_cast<char*>(header), 16)) {
    throw FormatError(path + ": truncated header at offset 0");
  }
  if (std::memcmp(header, kFeatureMagic, 8) != 0) {
    throw FormatError(path + ": bad magic at offset 0");
  }
  const std::uint32_t count = get_u32le(header + 8);
  const std::uint32_t dim = get_u32le(header + 12);
  if (dim == 0) throw FormatError(path + ": dim must be >= 1 at offset 12");
  // Validate the declared size before allocating count*dim storage.
  const std::uint64_t expected =
      16ull + 4ull * static_cast<std::uint64_t>(count) * dim;
  if (actual != expected) {
    throw FormatError(path + ": file length " + std::to_string(actual) +
                      " does not match declared " + std::to_string(expected) +
                      " at offset 16");
  }
  FloatMatrix m(count, dim);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
      throw FormatError(path + ": truncated data at offset " +
                        std::to_string(16 + 4 * i));
    }
    m.data[i] = std::bit_cast<float>(get_u32le(b));
  }
  return m;
}

namespace {

std::string manifest_stem(const std::string& path) {
  std::filesystem::path p(path);
  std::string name = p.filename().string();
  auto dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

}  // namespace

DatasetSplit parse_manifest(const std::string& path, const GradeScale& scale) {
  std::string stem = manifest_stem(path);
  std::filesystem::path features =
      std::filesystem::path(path).parent_path() / (stem + ".features.bin");
  return parse_manifest(path, stem, features.string(), scale);
}

DatasetSplit parse_manifest(const std::string& path, std::string name,
                            std::string feature_file, const GradeScale& scale) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest '" + path + "'");
  DatasetSplit result;
  result.name = std::move(name);
  result.feature_file = std::move(feature_file);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fail = [&](const std::string& why) -> FormatError {
      return FormatError(path + ":" + std::to_string(line_no) + ": " + why);
    };
    auto fields = split(line, '\t');
    if (fields.size() != 5) {
      throw fail("expected 5 tab-separated fields, got " +
                 std::to_string(fields.size()));
    }
    ResponseRecord rec;
    rec.submission_id = fields[0];
    try {
      rec.part = parse_int(fields[1], "part");
    } catch (const DomainError& e) {
      throw fail(e.what());
    }
    if (rec.part < 1 || rec.part > 5) {
      throw fail("part out of 1..5 (got " + fields[1] + ")");
    }
    rec.response_id = fields[2];
    for (const auto& tok : split(fields[3], ',')) {
      try {
        rec.chunk_rows.push_back(parse_size(tok, "chunk row"));
      } catch (const DomainError& e) {
        throw fail(e.what());
      }
    }
    if (rec.chunk_rows.empty()) throw fail("empty chunk row list");
    if (fields[4] != "-") {
      double ref = 0.0;
      try {
        ref = parse_double(fields[4], "reference score");
      } catch (const DomainError& e) {
        throw fail(e.what());
      }
      if (!scale.on_grid(ref)) {
        throw fail("off-grid score " + fields[4]);
      }
      rec.ref_score = ref;
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

void write_manifest(const DatasetSplit& split, const std::string& path) {
  auto out = open_out(path);
  out << "# columns: submission_id part response_id chunk_rows ref_score\n";
  for (const auto& rec : split.records) {
    std::vector<std::string> rows;
    rows.reserve(rec.chunk_rows.size());
    for (std::size_t r : rec.chunk_rows) rows.push_back(std::to_string(r));
    out << rec.submission_id << '\t' << rec.part << '\t' << rec.response_id
        << '\t' << join(rows, ',') << '\t'
        << (rec.ref_score ? format_g17(*rec.ref_score) : "-") << '\n';
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

namespace {

void write_block(std::ostream& out, const std::string& name,
                 const std::vector<double>& values, std::size_t rows,
                 std::size_t cols) {
  out << '[' << name << ' ' << rows;
  if (cols > 0) out << ' ' << cols;
  out << "]\n";
  const std::size_t per_line = cols > 0 ? cols : values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << double_to_hex(values[i]);
    out << (((i + 1) % per_line == 0) ? '\n' : ' ');
  }
  if (values.empty()) return;
  if (values.size() % per_line != 0) out << '\n';
}

}  // namespace

void save_model(const GraderModel& model, const std::string& path,
                const std::map<std::string, std::string>& extra_meta) {
  model.check_shapes();
  auto out = open_out(path);
  out << kModelHeader << '\n';
  out << "head_kind=" << head_kind_name(model.head) << '\n';
  out << "input_dim=" << model.input_dim << '\n';
  out << "hidden_dim=" << model.hidden_dim << '\n';
  {
    std::vector<std::string> scores;
    for (double s : model.scale.scores()) scores.push_back(format_g17(s));
    out << "labels=" << join(model.scale.labels(), ',') << '\n';
    out << "scores=" << join(scores, ',') << '\n';
    out << "grid_step=" << format_g17(model.scale.grid_step()) << '\n';
  }
  if (!extra_meta.count("seed")) out << "seed=0\n";
  for (const auto& [k, v] : extra_meta) out << k << '=' << v << '\n';

  if (model.hidden_dim > 0) {
    write_block(out, "W1", model.w1.data, model.w1.rows, model.w1.cols);
    write_block(out, "b1", model.b1, model.b1.size(), 0);
  }
  write_block(out, "Wout", model.wout.data, model.wout.rows, model.wout.cols);
  write_block(out, "bout", model.bout, model.bout.size(), 0);
  if (!out) throw FormatError("write failed for '" + path + "'");
}

namespace {

struct BlockHeader {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;  // 0 for vectors
};

BlockHeader parse_block_header(const std::string& line,
                               const std::string& path) {
  if (line.size() < 3 || line.front() != '[' || line.back() != ']') {
    throw FormatError(path + ": malformed block header '" + line + "'");
  }
  auto parts = split(line.substr(1, line.size() - 2), ' ');
  if (parts.size() != 2 && parts.size() != 3) {
    throw FormatError(path + ": malformed block header '" + line + "'");
  }
  BlockHeader h;
  h.name = parts[0];
  h.rows = parse_size(parts[1], "block rows");
  if (parts.size() == 3) h.cols = parse_size(parts[2], "block cols");
  return h;
}

std::vector<double> read_block_values(std::istream& in, const BlockHeader& h,
                                      const std::string& path) {
  const std::size_t count = h.rows * (h.cols > 0 ? h.cols : 1);
  std::vector<double> values;
  values.reserve(count);
  std::string token;
  while (values.size() < count) {
    if (!(in >> token)) {
      throw FormatError(path + ": truncated block " + h.name + " (expected " +
                        std::to_string(count) + " values, got " +
                        std::to_string(values.size()) + ")");
    }
    try {
      values.push_back(double_from_hex(token));
    } catch (const DomainError& e) {
      throw FormatError(path + ": block " + h.name + ": " + e.what());
    }
  }
  return values;
}

}  // namespace

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kModelHeader) {
    throw FormatError(path + ": unsupported model header '" + line +
                      "' (expected '" + kModelHeader + "')");
  }
  std::map<std::string, std::string> meta;
  std::string pending_block;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == '[') {
      pending_block = line;
      break;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path + ": expected key=value line, got '" + line + "'");
    }
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto require = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) {
      throw FormatError(path + ": missing required key '" + key + "'");
    }
    return it->second;
  };

  LoadedModel loaded;
  GraderModel& m = loaded.model;
  m.head = head_kind_from_name(require("head_kind"));
  m.input_dim = parse_size(require("input_dim"), "input_dim");
  m.hidden_dim = parse_size(require("hidden_dim"), "hidden_dim");
  {
    auto labels = split(require("labels"), ',');
    auto score_text = split(require("scores"), ',');
    std::vector<double> scores;
    for (const auto& s : score_text) scores.push_back(parse_double(s, "score"));
    m.scale = GradeScale(labels, scores,
                         parse_double(require("grid_step"), "grid_step"));
  }

  auto read_named_block = [&](const std::string& name, std::size_t rows,
                              std::size_t cols) -> std::vector<double> {
    if (pending_block.empty() && !std::getline(in, pending_block)) {
      throw FormatError(path + ": missing block " + name);
    }
    while (pending_block.empty() || pending_block[0] == '#') {
      if (!std::getline(in, pending_block)) {
        throw FormatError(path + ": missing block " + name);
      }
    }
    BlockHeader h = parse_block_header(pending_block, path);
    pending_block.clear();
    if (h.name != name) {
      throw FormatError(path + ": expected block " + name + ", found " +
                        h.name);
    }
    if (h.rows != rows || h.cols != cols) {
      throw FormatError(path + ": block " + name +
                        " dimensions do not match header (" +
                        std::to_string(h.rows) + "x" + std::to_string(h.cols) +
                        " vs " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ")");
    }
    return read_block_values(in, h, path);
  };

  if (m.hidden_dim > 0) {
    m.w1 = Matrix(m.hidden_dim, m.input_dim);
    m.w1.data = read_named_block("W1", m.hidden_dim, m.input_dim);
    m.b1 = read_named_block("b1", m.hidden_dim, 0);
  }
  m.wout = Matrix(m.out_dim(), m.head_input_dim());
  m.wout.data = read_named_block("Wout", m.out_dim(), m.head_input_dim());
  m.bout = read_named_block("bout", m.out_dim(), 0);
  m.check_shapes();
  loaded.meta = std::move(meta);
  return loaded;
}

void write_predictions(std::span<const PredictionRecord> records,
                       const std::string& path) {
  auto out = open_out(path);
  out << "# columns: response_id part mode score probs\n";
  for (const auto& rec : records) {
    out << rec.response_id << '\t' << rec.part << '\t'
        << decode_mode_name(rec.mode) << '\t'
        << format_f6(rec.response_score) << '\t';
    if (rec.chunk_probs.empty()) {
      out << '-';
    } else {
      // The chunk-mean distribution; single-chunk records write theirs.
      std::vector<double> mean(rec.chunk_probs[0].size(), 0.0);
      for (const auto& probs : rec.chunk_probs) {
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += probs[c];
      }
      std::vector<std::string> cells;
      cells.reserve(mean.size());
      for (double p : mean) {
        cells.push_back(format_f6(p / static_cast<double>(
                                          rec.chunk_probs.size())));
      }
      out << join(cells, ',');
    }
    out << '\n';
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

std::vector<PredictionRecord> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open predictions file '" + path + "'");
  std::vector<PredictionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fail = [&](const std::string& why) -> FormatError {
      return FormatError(path + ":" + std::to_string(line_no) + ": " + why);
    };
    auto fields = split(line, '\t');
    if (fields.size() != 5) {
      throw fail("expected 5 tab-separated fields, got " +
                 std::to_string(fields.size()));
    }
    PredictionRecord rec;
    rec.response_id = fields[0];
    try {
      rec.part = parse_int(fields[1], "part");
      rec.mode = decode_mode_from_name(fields[2]);
      rec.response_score = parse_double(fields[3], "score");
      if (fields[4] != "-") {
        std::vector<double> probs;
        for (const auto& tok : split(fields[4], ',')) {
          probs.push_back(parse_double(tok, "probability"));
        }
        rec.chunk_probs.push_back(std::move(probs));
      }
    } catch (const DomainError& e) {
      throw fail(e.what());
    }
    if (rec.mode == DecodeMode::Reg && !rec.chunk_probs.empty()) {
      throw fail("reg prediction must not carry probabilities");
    }
    if (rec.mode != DecodeMode::Reg && rec.chunk_probs.empty()) {
      throw fail("classification prediction missing probabilities");
    }
    rec.chunk_scores.push_back(rec.response_score);
    records.push_back(std::move(rec));
  }
  return records;
}

void save_calibration(const CalibrationParams& params,
                      const std::string& path) {
  auto out = open_out(path);
  out << kCalibHeader << '\n';
  out << "slope_hex=" << double_to_hex(params.slope) << '\n';
  out << "intercept_hex=" << double_to_hex(params.intercept) << '\n';
  out << "slope=" << format_g17(params.slope) << '\n';
  out << "intercept=" << format_g17(params.intercept) << '\n';
  out << "fitted_on=" << params.fitted_on << '\n';
  out << "n_fit=" << params.n_fit << '\n';
  if (!out) throw FormatError("write failed for '" + path + "'");
}

CalibrationParams load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open calibration file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kCalibHeader) {
    throw FormatError(path + ": unsupported calibration header '" + line +
                      "'");
  }
  std::map<std::string, std::string> kv;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path + ": expected key=value line, got '" + line +
                        "'");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto require = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw FormatError(path + ": missing required key '" + key + "'");
    }
    return it->second;
  };
  CalibrationParams params;
  params.slope = double_from_hex(require("slope_hex"));
  params.intercept = double_from_hex(require("intercept_hex"));
  params.fitted_on = require("fitted_on");
  params.n_fit = parse_size(require("n_fit"), "n_fit");
  return params;
}

void write_trainlog(const TrainLog& log, const std::string& path) {
  auto out = open_out(path);
  out << "# step\tindex\tlr\tloss\n";
  for (const auto& s : log.steps) {
    out << "step\t" << s.step << '\t' << format_g17(s.lr) << '\t'
        << format_g17(s.loss) << '\n';
  }
  for (std::size_t e = 0; e < log.epoch_mean_loss.size(); ++e) {
    out << "epoch\t" << e << "\t-\t" << format_g17(log.epoch_mean_loss[e])
        << '\n';
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace sla
