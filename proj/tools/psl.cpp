// psl: generate synthetic data, train, evaluate, sweep and analyze.

#include "psl/analysis.hpp"
#include "psl/io.hpp"
#include "psl/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace psl;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "run configuration (JSON)")->check(CLI::ExistingFile);
  if (needs_config) opt->required();
  cmd->add_option("--seed", c.seed, "override the seed this command consumes");
  cmd->add_option("--out", c.out, "output directory")->required();
}

io::RunConfig load_config(const std::string& path) {
  return path.empty() ? io::RunConfig{} : io::load_run_config(path);
}

EvalConfig apply_eval_flags(EvalConfig eval, const std::optional<std::string>& protocol,
                            const std::optional<int>& splits, const std::optional<std::string>& method,
                            const std::optional<std::uint64_t>& split_seed) {
  if (protocol) eval.protocol = parse_protocol(*protocol);
  if (splits) eval.splits = *splits;
  if (method) eval.method = parse_method(*method);
  if (split_seed) eval.split_seed = *split_seed;
  eval.validate();
  return eval;
}

void check_shapes(const io::Checkpoint& ck, const io::Dataset& data) {
  if (ck.frames_per_seq != data.generator.frames_per_seq || ck.frame_dim != data.generator.frame_dim) {
    throw ValidationError("checkpoint expects " + std::to_string(ck.frames_per_seq) + " frames of dimension " +
                          std::to_string(ck.frame_dim) + " but the dataset has " +
                          std::to_string(data.generator.frames_per_seq) + " frames of dimension " +
                          std::to_string(data.generator.frame_dim));
  }
}

// ------------------------------------------------------------------ gen

int cmd_gen(const Common& c) {
  io::RunConfig cfg = load_config(c.config);
  if (c.seed) cfg.generator.seed = *c.seed;
  const DatasetSplits data = generate_splits(cfg.generator);
  io::write_dataset(c.out, cfg.generator, data);
  std::cout << "wrote " << data.train.size() << " train, " << data.test_ind.size() << " InD test and "
            << data.test_ood.size() << " OoD test samples to " << c.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const Common& c, const std::string& data_dir) {
  io::RunConfig cfg = load_config(c.config);
  if (c.seed) cfg.train.seed = *c.seed;
  const io::Dataset data = io::load_dataset(data_dir);
  io::ensure_directory(c.out);

  const TrainResult result = train(data.splits.train, cfg.train, data.generator.num_ind_classes);
  io::Checkpoint ck{cfg.train, data.generator.seed, data.generator.frames_per_seq, data.generator.frame_dim,
                    result.params, result.bank, result.log};
  io::write_json(fs::path(c.out) / "checkpoint.json", io::to_json(ck));
  io::write_text(fs::path(c.out) / "train_log.csv", io::train_log_csv(result.log));
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    std::cout << "epoch " << last.epoch << ": loss " << last.loss << ", train acc " << last.train_accuracy << "\n";
  }
  return 0;
}

// ----------------------------------------------------------------- eval

struct EvalFlags {
  std::string checkpoint;
  std::string data;
  std::optional<std::string> protocol;
  std::optional<int> splits;
  std::optional<std::string> method;
  std::optional<std::uint64_t> split_seed;
};

void add_eval_flags(CLI::App* cmd, EvalFlags& f) {
  cmd->add_option("--checkpoint", f.checkpoint, "checkpoint written by train")->required()->check(CLI::ExistingFile);
  cmd->add_option("--data", f.data, "dataset directory written by gen")->required();
  cmd->add_option("--method", f.method, "uncertainty score: mahalanobis or softmax");
}

int cmd_eval(const Common& c, const EvalFlags& f) {
  const io::RunConfig cfg = load_config(c.config);
  const EvalConfig eval = apply_eval_flags(cfg.eval, f.protocol, f.splits, f.method, c.seed ? c.seed : f.split_seed);
  const io::Checkpoint ck = io::checkpoint_from_json(io::read_json(f.checkpoint));
  const io::Dataset data = io::load_dataset(f.data);
  check_shapes(ck, data);
  io::ensure_directory(c.out);

  const ScoredModel scored = score_model(ck.params, ck.bank, ck.train.loss.tau, data.splits.train,
                                         data.splits.test_ind, data.splits.test_ood, eval);
  const MetricsReport report = evaluate_scores(scored.test, scored.train_scores, eval);

  io::Json j = io::to_json(report);
  j["method"] = std::string(to_string(eval.method));
  j["split_seed"] = eval.split_seed;
  j["data_seed"] = ck.data_seed;
  j["train_seed"] = ck.train.seed;
  const fs::path out(c.out);
  io::write_json(out / "report.json", j);
  io::write_text(out / "per_split.csv", io::per_split_csv(report));
  io::write_text(out / "scores.csv", io::scores_csv(scored.test));
  io::write_text(out / "embeddings.csv", io::embedding_csv(scored.test, scored.test_features));
  std::cout << "AUROC " << report.auroc << "  AUPR " << report.aupr << "  FPR95 " << report.fpr95 << "  Acc "
            << report.closed_set_acc << "\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepFlags {
  std::string data;
  std::vector<double> s_values;
  std::vector<int> d_values;
  std::vector<double> s_shuf_values;
  std::vector<std::uint64_t> seeds;
};

int cmd_sweep(const Common& c, const SweepFlags& f) {
  const int lists = !f.s_values.empty() + !f.d_values.empty() + !f.s_shuf_values.empty();
  if (lists != 1) throw ValidationError("sweep needs exactly one of --s-values, --d-values, --s-shuf-values");

  io::RunConfig cfg = load_config(c.config);
  if (c.seed) cfg.train.seed = *c.seed;
  const std::vector<std::uint64_t> seeds = f.seeds.empty() ? std::vector<std::uint64_t>{cfg.train.seed} : f.seeds;

  io::Dataset data;
  if (f.data.empty()) {
    data.generator = cfg.generator;
    data.splits = generate_splits(cfg.generator);
  } else {
    data = io::load_dataset(f.data);
  }
  io::ensure_directory(c.out);

  std::string param;
  std::vector<double> values;
  if (!f.s_values.empty()) {
    param = "s";
    values = f.s_values;
  } else if (!f.d_values.empty()) {
    param = "d";
    values.assign(f.d_values.begin(), f.d_values.end());
  } else {
    param = "s_shuf";
    values = f.s_shuf_values;
  }

  const fs::path csv_path = fs::path(c.out) / "sweep.csv";
  std::string csv = "param,value,auroc,aupr,fpr95,acc,num_seeds,status\n";
  io::write_text(csv_path, csv);
  for (double v : values) {
    const std::string value_text = param == "d" ? std::to_string(static_cast<int>(v)) : io::format_double(v);
    try {
      TrainConfig tc = cfg.train;
      if (param == "s") {
        tc.loss.s = v;
        tc.loss.s_shuf = v;
      } else if (param == "s_shuf") {
        tc.loss.s_shuf = v;
      } else {
        tc.embed_dim = static_cast<int>(v);
      }
      double auroc = 0, aupr = 0, fpr = 0, acc = 0;
      for (std::uint64_t seed : seeds) {
        tc.seed = seed;
        const ExperimentResult r = run_experiment(data.splits, data.generator.num_ind_classes, tc, cfg.eval);
        auroc += r.report.auroc;
        aupr += r.report.aupr;
        fpr += r.report.fpr95;
        acc += r.report.closed_set_acc;
      }
      const double n = static_cast<double>(seeds.size());
      csv += param + ',' + value_text + ',' + io::format_double(auroc / n) + ',' + io::format_double(aupr / n) + ',' +
             io::format_double(fpr / n) + ',' + io::format_double(acc / n) + ',' + std::to_string(seeds.size()) + ",ok\n";
      io::write_text(csv_path, csv);
      std::cout << param << "=" << value_text << "  AUROC " << auroc / n << "  Acc " << acc / n << "\n";
    } catch (const std::exception& e) {
      std::string reason = e.what();
      for (char& ch : reason)
        if (ch == ',' || ch == '\n') ch = ';';
      csv += param + ',' + value_text + ",,,,," + std::to_string(seeds.size()) + ",failed: " + reason + "\n";
      io::write_text(csv_path, csv);
      throw;
    }
  }
  return 0;
}

// -------------------------------------------------------------- analyze

struct AnalyzeFlags {
  EvalFlags eval;
  bool spectrum = false;
  bool stats = false;
  bool per_class = false;
  bool hist = false;
  int bins = 20;
};

int cmd_analyze(const Common& c, const AnalyzeFlags& f) {
  if (!(f.spectrum || f.stats || f.per_class || f.hist)) {
    throw ValidationError("analyze needs at least one of --spectrum, --stats, --per-class, --hist");
  }
  const io::RunConfig cfg = load_config(c.config);
  const EvalConfig eval = apply_eval_flags(cfg.eval, std::nullopt, std::nullopt, f.eval.method, std::nullopt);
  const io::Checkpoint ck = io::checkpoint_from_json(io::read_json(f.eval.checkpoint));
  const io::Dataset data = io::load_dataset(f.eval.data);
  check_shapes(ck, data);
  io::ensure_directory(c.out);
  const fs::path out(c.out);

  const ScoredModel scored = score_model(ck.params, ck.bank, ck.train.loss.tau, data.splits.train,
                                         data.splits.test_ind, data.splits.test_ood, eval);
  if (f.spectrum) {
    const SpectrumReport s =
        singular_spectrum(covariance_matrix(scored.test_features), static_cast<int>(scored.test_features.rows()));
    io::write_text(out / "spectrum.csv", io::spectrum_csv(s));
  }
  if (f.stats) {
    std::vector<int> labels, predicted;
    std::vector<bool> is_ood;
    for (const auto& r : scored.test) {
      labels.push_back(*r.true_label);
      predicted.push_back(*r.predicted_label);
      is_ood.push_back(r.is_ood);
    }
    const ClassStats s = class_similarity_stats(scored.test_features, labels, predicted, ck.bank, is_ood);
    io::write_text(out / "stats.csv", io::stats_csv(s));
  }
  if (f.per_class) {
    const auto rows = per_class_uncertainty(scored.test);
    io::write_text(out / "per_class.csv", io::per_class_csv(rows));
  }
  if (f.hist) {
    const Histogram h = uncertainty_histogram(scored.test, f.bins);
    io::write_text(out / "histogram.csv", io::histogram_csv(h));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototypical similarity learning toolkit"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, sweep_c, analyze_c;
  std::string train_data;
  EvalFlags eval_f;
  SweepFlags sweep_f;
  AnalyzeFlags analyze_f;

  auto* gen = app.add_subcommand("gen", "generate the synthetic dataset");
  add_common(gen, gen_c, false);

  auto* trn = app.add_subcommand("train", "train an encoder and prototypes");
  add_common(trn, train_c, false);
  trn->add_option("--data", train_data, "dataset directory written by gen")->required();

  auto* ev = app.add_subcommand("eval", "score a checkpoint and compute open-set metrics");
  add_common(ev, eval_c, false);
  add_eval_flags(ev, eval_f);
  ev->add_option("--protocol", eval_f.protocol, "all_thresholds or one_threshold");
  ev->add_option("--splits", eval_f.splits, "number of OoD splits");
  ev->add_option("--split-seed", eval_f.split_seed, "seed for the OoD split shuffle");

  auto* sw = app.add_subcommand("sweep", "train and evaluate once per hyperparameter value");
  add_common(sw, sweep_c, false);
  sw->add_option("--data", sweep_f.data, "dataset directory (generated from the config when omitted)");
  sw->add_option("--s-values", sweep_f.s_values, "values of s (applied to s and s_shuf)")->delimiter(',');
  sw->add_option("--d-values", sweep_f.d_values, "embedding dimensions")->delimiter(',');
  sw->add_option("--s-shuf-values", sweep_f.s_shuf_values, "values of s_shuf alone")->delimiter(',');
  sw->add_option("--seeds", sweep_f.seeds, "training seeds averaged per value")->delimiter(',');

  auto* an = app.add_subcommand("analyze", "write representation analysis tables");
  add_common(an, analyze_c, false);
  add_eval_flags(an, analyze_f.eval);
  an->add_flag("--spectrum", analyze_f.spectrum, "covariance singular-value spectrum");
  an->add_flag("--stats", analyze_f.stats, "similarity and variance statistics");
  an->add_flag("--per-class", analyze_f.per_class, "per-class uncertainty table");
  an->add_flag("--hist", analyze_f.hist, "InD/OoD uncertainty histogram");
  an->add_option("--bins", analyze_f.bins, "histogram bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_c);
    if (trn->parsed()) return cmd_train(train_c, train_data);
    if (ev->parsed()) return cmd_eval(eval_c, eval_f);
    if (sw->parsed()) return cmd_sweep(sweep_c, sweep_f);
    if (an->parsed()) return cmd_analyze(analyze_c, analyze_f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
