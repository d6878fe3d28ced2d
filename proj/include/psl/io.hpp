#pragma once

// File formats used by the command-line tool: run configs, dataset and
// embedding CSVs, manifests, checkpoints, reports and analysis tables.
// Requires nlohmann/json (vendored as json.hpp).

#include "psl/analysis.hpp"
#include "psl/metrics.hpp"
#include "psl/pipeline.hpp"
#include "psl/synthgen.hpp"
#include "psl/trainer.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace psl::io {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, std::string_view what) {
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError(std::string(what) + ": '" + std::string(text) + "' is not a number");
  }
  return x;
}

inline std::int64_t parse_int(std::string_view text, std::string_view what) {
  std::int64_t x = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError(std::string(what) + ": '" + std::string(text) + "' is not an integer");
  }
  return x;
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// ---------------------------------------------------------------- files

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// ------------------------------------------------------- strict reading

/// Reads fields of one JSON object, naming the offending field on any type
/// error and rejecting keys that were never read.
class FieldReader {
 public:
  FieldReader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ValidationError("config field '" + path_ + "' must be an object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    convert(*it, out, path_ + "." + key);
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const Json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ValidationError("unknown config field '" + path_ + "." + it.key() + "'");
    }
  }

 private:
  static void convert(const Json& v, int& out, const std::string& p) {
    if (!v.is_number_integer()) throw ValidationError("config field '" + p + "' must be an integer");
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) throw ValidationError("config field '" + p + "' is out of range");
    out = static_cast<int>(x);
  }
  static void convert(const Json& v, std::uint64_t& out, const std::string& p) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ValidationError("config field '" + p + "' must be a nonnegative integer");
    }
    out = v.get<std::uint64_t>();
  }
  static void convert(const Json& v, double& out, const std::string& p) {
    if (!v.is_number()) throw ValidationError("config field '" + p + "' must be a number");
    out = v.get<double>();
  }
  static void convert(const Json& v, bool& out, const std::string& p) {
    if (!v.is_boolean()) throw ValidationError("config field '" + p + "' must be true or false");
    out = v.get<bool>();
  }
  static void convert(const Json& v, std::string& out, const std::string& p) {
    if (!v.is_string()) throw ValidationError("config field '" + p + "' must be a string");
    out = v.get<std::string>();
  }

  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void with_context(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.find("config field") != std::string::npos) throw;
    throw ValidationError("config field '" + section + "': " + msg);
  }
}

// -------------------------------------------------------------- configs

inline Json to_json(const GeneratorConfig& c) {
  return Json{{"num_ind_classes", c.num_ind_classes},
              {"num_ood_classes", c.num_ood_classes},
              {"frames_per_seq", c.frames_per_seq},
              {"frame_dim", c.frame_dim},
              {"noise_sigma", c.noise_sigma},
              {"appearance_twin_fraction", c.appearance_twin_fraction},
              {"seed", c.seed},
              {"appearance_scale", c.appearance_scale},
              {"pattern_scale", c.pattern_scale},
              {"ind_twin_pairs", c.ind_twin_pairs},
              {"train_per_class", c.train_per_class},
              {"test_per_class", c.test_per_class},
              {"ood_per_class", c.ood_per_class}};
}

inline GeneratorConfig generator_from_json(const Json& j, const std::string& path = "generator") {
  GeneratorConfig c;
  FieldReader r(j, path);
  r.read("num_ind_classes", c.num_ind_classes);
  r.read("num_ood_classes", c.num_ood_classes);
  r.read("frames_per_seq", c.frames_per_seq);
  r.read("frame_dim", c.frame_dim);
  r.read("noise_sigma", c.noise_sigma);
  r.read("appearance_twin_fraction", c.appearance_twin_fraction);
  r.read("seed", c.seed);
  r.read("appearance_scale", c.appearance_scale);
  r.read("pattern_scale", c.pattern_scale);
  r.read("ind_twin_pairs", c.ind_twin_pairs);
  r.read("train_per_class", c.train_per_class);
  r.read("test_per_class", c.test_per_class);
  r.read("ood_per_class", c.ood_per_class);
  r.finish();
  with_context(path, [&] { c.validate(); });
  return c;
}

inline Json to_json(const TrainConfig& c) {
  return Json{{"mode", std::string(to_string(c.mode))},
              {"use_shuffled", c.use_shuffled},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"momentum", c.momentum},
              {"hidden_dim", c.hidden_dim},
              {"embed_dim", c.embed_dim},
              {"inflated_init", c.inflated_init},
              {"seed", c.seed},
              {"loss", Json{{"tau", c.loss.tau}, {"s", c.loss.s}, {"s_shuf", c.loss.s_shuf}}}};
}

inline TrainConfig train_from_json(const Json& j, const std::string& path = "train") {
  TrainConfig c;
  FieldReader r(j, path);
  std::string mode(to_string(c.mode));
  r.read("mode", mode);
  with_context(r.path("mode"), [&] { c.mode = parse_loss_mode(mode); });
  r.read("use_shuffled", c.use_shuffled);
  r.read("epochs", c.epochs);
  r.read("batch_size", c.batch_size);
  r.read("learning_rate", c.learning_rate);
  r.read("momentum", c.momentum);
  r.read("hidden_dim", c.hidden_dim);
  r.read("embed_dim", c.embed_dim);
  r.read("inflated_init", c.inflated_init);
  r.read("seed", c.seed);
  if (const Json* loss = r.child("loss")) {
    FieldReader lr(*loss, r.path("loss"));
    lr.read("tau", c.loss.tau);
    lr.read("s", c.loss.s);
    lr.read("s_shuf", c.loss.s_shuf);
    lr.finish();
  }
  r.finish();
  with_context(path, [&] { c.validate(); });
  return c;
}

inline Json to_json(const EvalConfig& c) {
  Json j{{"method", std::string(to_string(c.method))},
         {"protocol", std::string(to_string(c.protocol))},
         {"splits", c.splits},
         {"split_seed", c.split_seed}};
  j["ridge"] = c.ridge ? Json(*c.ridge) : Json(nullptr);
  return j;
}

inline EvalConfig eval_from_json(const Json& j, const std::string& path = "eval") {
  EvalConfig c;
  FieldReader r(j, path);
  std::string method(to_string(c.method)), protocol(to_string(c.protocol));
  r.read("method", method);
  r.read("protocol", protocol);
  with_context(r.path("method"), [&] { c.method = parse_method(method); });
  with_context(r.path("protocol"), [&] { c.protocol = parse_protocol(protocol); });
  r.read("splits", c.splits);
  r.read("split_seed", c.split_seed);
  if (const Json* ridge = r.child("ridge"); ridge && !ridge->is_null()) {
    if (!ridge->is_number()) throw ValidationError("config field '" + r.path("ridge") + "' must be a number or null");
    c.ridge = ridge->get<double>();
    if (!(*c.ridge >= 0.0)) throw ValidationError("config field '" + r.path("ridge") + "' must be nonnegative");
  }
  r.finish();
  with_context(path, [&] { c.validate(); });
  return c;
}

struct RunConfig {
  GeneratorConfig generator;
  TrainConfig train;
  EvalConfig eval;
};

inline Json to_json(const RunConfig& c) {
  return Json{{"generator", to_json(c.generator)}, {"train", to_json(c.train)}, {"eval", to_json(c.eval)}};
}

inline RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  FieldReader r(j, "config");
  if (const Json* g = r.child("generator")) c.generator = generator_from_json(*g);
  if (const Json* t = r.child("train")) c.train = train_from_json(*t);
  if (const Json* e = r.child("eval")) c.eval = eval_from_json(*e);
  r.finish();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json(read_json(path)); }

// ------------------------------------------------------------- datasets

inline constexpr const char* kTrainFile = "train.csv";
inline constexpr const char* kTestIndFile = "test_ind.csv";
inline constexpr const char* kTestOodFile = "test_ood.csv";
inline constexpr const char* kManifestFile = "manifest.json";

inline std::string dataset_csv(std::span<const SequenceSample> samples, int frames, int frame_dim) {
  std::string out = "sample_id,label,is_ood";
  const int width = frames * frame_dim;
  for (int k = 0; k < width; ++k) out += ",f_" + std::to_string(k);
  out += '\n';
  for (const auto& s : samples) {
    require(s.frames.rows() == frames && s.frames.cols() == frame_dim, "sample shape does not match the dataset");
    out += std::to_string(s.id) + ',' + std::to_string(s.label) + ',' + (s.is_ood ? "1" : "0");
    const Vector flat = s.flatten();
    for (Eigen::Index k = 0; k < flat.size(); ++k) out += ',' + format_double(flat(k));
    out += '\n';
  }
  return out;
}

inline std::vector<SequenceSample> parse_dataset_csv(const std::string& text, int frames, int frame_dim,
                                                     const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + source + "' is empty");
  const auto header = split(line, ',');
  const auto width = static_cast<std::size_t>(frames * frame_dim);
  if (header.size() != 3 + width || header[0] != "sample_id" || header[1] != "label" || header[2] != "is_ood") {
    throw ValidationError("'" + source + "' header does not match " + std::to_string(frames) + " frames of dimension " +
                          std::to_string(frame_dim));
  }
  std::vector<SequenceSample> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const std::string where = source + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) throw ValidationError(where + ": expected " + std::to_string(header.size()) + " columns");
    SequenceSample s;
    s.id = parse_int(cells[0], where + " sample_id");
    s.label = static_cast<int>(parse_int(cells[1], where + " label"));
    const auto flag = parse_int(cells[2], where + " is_ood");
    require(flag == 0 || flag == 1, where + ": is_ood must be 0 or 1");
    s.is_ood = flag == 1;
    s.frames.resize(frames, frame_dim);
    for (int t = 0; t < frames; ++t) {
      for (int f = 0; f < frame_dim; ++f) {
        const double v = parse_double(cells[3 + static_cast<std::size_t>(t * frame_dim + f)], where);
        require(std::isfinite(v), where + ": frame values must be finite");
        s.frames(t, f) = v;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct DatasetManifest {
  GeneratorConfig generator;
  std::vector<ClassSpec> classes;
  std::size_t train_count = 0;
  std::size_t test_ind_count = 0;
  std::size_t test_ood_count = 0;
};

inline Json to_json(const DatasetManifest& m) {
  Json classes = Json::array();
  for (const auto& c : m.classes) {
    classes.push_back(Json{{"label", c.label},
                           {"is_ood", c.is_ood},
                           {"twin_of", c.twin_of ? Json(*c.twin_of) : Json(nullptr)},
                           {"frequency", c.frequency},
                           {"phase", c.phase},
                           {"motion_norm", c.motion.norm()}});
  }
  return Json{{"data_seed", m.generator.seed},
              {"generator", to_json(m.generator)},
              {"num_classes", m.classes.size()},
              {"classes", classes},
              {"files", Json{{"train", kTrainFile}, {"test_ind", kTestIndFile}, {"test_ood", kTestOodFile}}},
              {"counts", Json{{"train", m.train_count}, {"test_ind", m.test_ind_count}, {"test_ood", m.test_ood_count}}}};
}

struct Dataset {
  GeneratorConfig generator;
  DatasetSplits splits;
};

inline void write_dataset(const std::filesystem::path& dir, const GeneratorConfig& cfg, const DatasetSplits& d) {
  ensure_directory(dir);
  const int T = cfg.frames_per_seq, df = cfg.frame_dim;
  write_text(dir / kTrainFile, dataset_csv(d.train, T, df));
  write_text(dir / kTestIndFile, dataset_csv(d.test_ind, T, df));
  write_text(dir / kTestOodFile, dataset_csv(d.test_ood, T, df));
  DatasetManifest m{cfg, make_class_specs(cfg), d.train.size(), d.test_ind.size(), d.test_ood.size()};
  write_json(dir / kManifestFile, to_json(m));
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory '" + dir.string() + "' does not exist");
  const Json manifest = read_json(dir / kManifestFile);
  if (!manifest.contains("generator")) throw ValidationError("manifest '" + (dir / kManifestFile).string() + "' has no generator section");
  Dataset d;
  d.generator = generator_from_json(manifest["generator"], "manifest.generator");
  const int T = d.generator.frames_per_seq, df = d.generator.frame_dim;
  const auto load = [&](const char* name) {
    const auto path = dir / name;
    return parse_dataset_csv(read_text(path), T, df, path.string());
  };
  d.splits.train = load(kTrainFile);
  d.splits.test_ind = load(kTestIndFile);
  d.splits.test_ood = load(kTestOodFile);
  return d;
}

inline std::string embedding_csv(std::span<const ScoreRecord> records, const FeatureMatrix& z) {
  require(static_cast<Eigen::Index>(records.size()) == z.rows(), "records and embeddings must align");
  std::string out = "sample_id,label,is_ood";
  for (Eigen::Index k = 0; k < z.cols(); ++k) out += ",z_" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out += std::to_string(r.sample_id) + ',' + (r.true_label ? std::to_string(*r.true_label) : "") + ',' +
           (r.is_ood ? "1" : "0");
    for (Eigen::Index k = 0; k < z.cols(); ++k) out += ',' + format_double(z(static_cast<Eigen::Index>(i), k));
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------- checkpoints

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
  require(j.is_array() && !j.empty() && j.front().is_array(), "checkpoint field '" + what + "' must be a nested list");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.front().size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_array() && j[i].size() == j.front().size(), "checkpoint field '" + what + "' has ragged rows");
    for (std::size_t k = 0; k < j[i].size(); ++k) {
      require(j[i][k].is_number(), "checkpoint field '" + what + "' must hold numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
  }
  return m;
}

inline Vector vector_from_json(const Json& j, const std::string& what) {
  require(j.is_array(), "checkpoint field '" + what + "' must be a list");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), "checkpoint field '" + what + "' must hold numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

struct Checkpoint {
  TrainConfig train;
  std::uint64_t data_seed = 0;
  int frames_per_seq = 0;
  int frame_dim = 0;
  EncoderParams params;
  PrototypeBank bank;
  std::vector<EpochLog> log;
};

inline Json to_json(const EpochLog& e) {
  return Json{{"epoch", e.epoch},
              {"loss", e.loss},
              {"train_accuracy", e.train_accuracy},
              {"sim_prototype", e.sim_prototype},
              {"sim_center", e.sim_center},
              {"variance", e.variance}};
}

inline Json to_json(const Checkpoint& c) {
  Json log = Json::array();
  for (const auto& e : c.log) log.push_back(to_json(e));
  return Json{{"format", "psl-checkpoint-1"},
              {"data_seed", c.data_seed},
              {"train_seed", c.train.seed},
              {"frames_per_seq", c.frames_per_seq},
              {"frame_dim", c.frame_dim},
              {"config", to_json(c.train)},
              {"encoder",
               Json{{"w1", matrix_to_json(c.params.w1)},
                    {"b1", vector_to_json(c.params.b1)},
                    {"w2", matrix_to_json(c.params.w2)},
                    {"b2", vector_to_json(c.params.b2)}}},
              {"prototypes", matrix_to_json(c.bank.matrix())},
              {"log", log}};
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  require(j.is_object() && j.value("format", "") == "psl-checkpoint-1", "not a checkpoint file");
  const auto field = [&](const char* key) -> const Json& {
    require(j.contains(key), std::string("checkpoint is missing '") + key + "'");
    return j.at(key);
  };
  Checkpoint c;
  c.train = train_from_json(field("config"), "checkpoint.config");
  c.data_seed = field("data_seed").get<std::uint64_t>();
  c.frames_per_seq = field("frames_per_seq").get<int>();
  c.frame_dim = field("frame_dim").get<int>();
  const Json& enc = field("encoder");
  for (const char* key : {"w1", "b1", "w2", "b2"}) require(enc.contains(key), std::string("checkpoint encoder is missing '") + key + "'");
  c.params.w1 = matrix_from_json(enc["w1"], "encoder.w1");
  c.params.b1 = vector_from_json(enc["b1"], "encoder.b1");
  c.params.w2 = matrix_from_json(enc["w2"], "encoder.w2");
  c.params.b2 = vector_from_json(enc["b2"], "encoder.b2");
  c.params.validate();
  c.bank = PrototypeBank(matrix_from_json(field("prototypes"), "prototypes"));
  require(c.bank.dim() == c.params.embed_dim(), "checkpoint prototypes do not match the encoder dimension");
  for (const auto& e : field("log")) {
    EpochLog l;
    l.epoch = e.at("epoch").get<int>();
    l.loss = e.at("loss").get<double>();
    l.train_accuracy = e.at("train_accuracy").get<double>();
    l.sim_prototype = e.at("sim_prototype").get<double>();
    l.sim_center = e.at("sim_center").get<double>();
    l.variance = e.at("variance").get<double>();
    c.log.push_back(l);
  }
  return c;
}

inline std::string train_log_csv(std::span<const EpochLog> log) {
  std::string out = "epoch,loss,acc,sim_prototype,sim_center,variance\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + ',' + format_double(e.loss) + ',' + format_double(e.train_accuracy) + ',' +
           format_double(e.sim_prototype) + ',' + format_double(e.sim_center) + ',' + format_double(e.variance) + '\n';
  }
  return out;
}

// -------------------------------------------------------------- reports

inline Json to_json(const MetricsReport& r) {
  Json splits = Json::array();
  for (const auto& s : r.per_split) {
    splits.push_back(Json{{"auroc", s.auroc}, {"aupr", s.aupr}, {"fpr95", s.fpr95}, {"num_ood", s.num_ood}});
  }
  Json j{{"auroc", r.auroc},
         {"aupr", r.aupr},
         {"fpr95", r.fpr95},
         {"closed_set_acc", r.closed_set_acc},
         {"protocol", std::string(to_string(r.protocol))},
         {"splits", r.splits}};
  j["threshold"] = r.threshold ? Json(*r.threshold) : Json(nullptr);
  j["per_split"] = splits;
  return j;
}

inline MetricsReport report_from_json(const Json& j) {
  MetricsReport r;
  r.auroc = j.at("auroc").get<double>();
  r.aupr = j.at("aupr").get<double>();
  r.fpr95 = j.at("fpr95").get<double>();
  r.closed_set_acc = j.at("closed_set_acc").get<double>();
  r.protocol = parse_protocol(j.at("protocol").get<std::string>());
  r.splits = j.at("splits").get<int>();
  if (j.contains("threshold") && !j["threshold"].is_null()) r.threshold = j["threshold"].get<double>();
  for (const auto& s : j.at("per_split")) {
    r.per_split.push_back(
        {s.at("auroc").get<double>(), s.at("aupr").get<double>(), s.at("fpr95").get<double>(), s.at("num_ood").get<std::size_t>()});
  }
  return r;
}

inline std::string per_split_csv(const MetricsReport& r) {
  std::string out = "split,num_ood,auroc,aupr,fpr95\n";
  for (std::size_t i = 0; i < r.per_split.size(); ++i) {
    const auto& s = r.per_split[i];
    out += std::to_string(i) + ',' + std::to_string(s.num_ood) + ',' + format_double(s.auroc) + ',' +
           format_double(s.aupr) + ',' + format_double(s.fpr95) + '\n';
  }
  return out;
}

inline std::string scores_csv(std::span<const ScoreRecord> records) {
  std::string out = "sample_id,label,is_ood,predicted_label,uncertainty\n";
  const auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& r : records) {
    out += std::to_string(r.sample_id) + ',' + opt(r.true_label) + ',' + (r.is_ood ? "1" : "0") + ',' +
           opt(r.predicted_label) + ',' + format_double(r.uncertainty) + '\n';
  }
  return out;
}

// ------------------------------------------------------------- analysis

inline std::string spectrum_csv(const SpectrumReport& s) {
  std::string out = "rank,value,log_value\n";
  for (std::size_t k = 0; k < s.singular_values.size(); ++k) {
    out += std::to_string(k + 1) + ',' + format_double(s.singular_values[k]) + ',' + format_double(s.log_values[k]) + '\n';
  }
  return out;
}

inline std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_low,bin_high,ind_count,ood_count\n";
  for (const auto& b : h.bins) {
    out += format_double(b.low) + ',' + format_double(b.high) + ',' + std::to_string(b.ind_count) + ',' +
           std::to_string(b.ood_count) + '\n';
  }
  return out;
}

/// One row per population in the InD / OoD x mean / variance layout; the
/// similarity to the class prototype is reported alongside.
inline std::string stats_csv(const ClassStats& s) {
  std::string out = "ind_mean,ind_variance,ood_mean,ood_variance,ind_sim_prototype,ood_sim_prototype\n";
  out += format_double(s.ind.mean_sim_center) + ',' + format_double(s.ind.variance) + ',' +
         format_double(s.ood.mean_sim_center) + ',' + format_double(s.ood.variance) + ',' +
         format_double(s.ind.mean_sim_prototype) + ',' + format_double(s.ood.mean_sim_prototype) + '\n';
  return out;
}

inline std::string per_class_csv(std::span<const ClassUncertainty> rows) {
  std::string out = "label,is_ood,count,mean,min,q1,median,q3,max\n";
  for (const auto& c : rows) {
    out += std::to_string(c.label) + ',' + (c.is_ood ? "1" : "0") + ',' + std::to_string(c.count) + ',' +
           format_double(c.mean) + ',' + format_double(c.min) + ',' + format_double(c.q1) + ',' +
           format_double(c.median) + ',' + format_double(c.q3) + ',' + format_double(c.max) + '\n';
  }
  return out;
}

}  // namespace psl::io
