#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "diagram/diagram.h"

namespace {

struct Flag {
  const char* name;  // long flag and config key (dashes map to underscores)
  const char* help;
};

constexpr Flag kDatasetFlags[] = {
    {"dataset", "dataset name under the data directory, or a directory path"},
    {"content", "explicit .content file"},
    {"cites", "explicit .cites file"},
    {"data-dir", "data directory (default: $DIAGRAM_DATA_DIR, else ./data)"},
    {"features", "feature mode: binary|tfidf"},
};

constexpr Flag kTrainFlags[] = {
    {"variant", "node|edge"},
    {"epochs", "epochs for the selected variant (node 30, edge 2 with transfer / 30 without)"},
    {"node-epochs", "epochs for an auto-trained node model"},
    {"batch-size", "mini-batch size"},
    {"lr", "learning rate"},
    {"dropout", "dropout rate (0.2, or 0.1 for citeseer)"},
    {"mu", "penalty on nonzero target coordinates"},
    {"checkpoint", "node checkpoint to start the edge model from"},
    {"holdout-p", "train on the residual graph after removing p percent of edges"},
    {"format", "embedding file format: text|binary"},
};

constexpr Flag kEvalFlags[] = {
    {"embeddings", "embedding file"},
    {"k-list", "comma-separated K values"},
    {"p", "percent of edges held out for link prediction"},
    {"ratios", "comma-separated train ratios (fractions or percents)"},
    {"constructors", "edge features: Average,Hadamard,W-L1,W-L2 or all"},
    {"scorer", "directed|symmetric"},
    {"node-features", "z|zoi"},
    {"repetitions", "classification repetitions per ratio"},
};

constexpr Flag kExportFlags[] = {
    {"embeddings", "embedding file to re-encode"},
    {"format", "text|binary"},
    {"out", "output directory (dataset) or file (embeddings)"},
};

constexpr Flag kCommonFlags[] = {
    {"seed", "random seed"},
    {"out", "output directory"},
};

// Collects flag values and applies them over the config file.
class Options {
 public:
  // Options hold references into values_, so it must never reallocate.
  Options() { values_.reserve(64); }

  void add(CLI::App* app, std::span<const Flag> flags) {
    for (const auto& f : flags) {
      auto& slot = values_.emplace_back(f.name, std::string());
      options_.emplace_back(app->add_option(std::string("--") + f.name, slot.second, f.help), values_.size() - 1);
    }
  }
  void add_config(CLI::App* app) { config_opt_ = app->add_option("--config", config_path_, "key = value config file"); }
  void add_no_auto_node(CLI::App* app) {
    no_auto_node_ = app->add_flag("--no-auto-node", "fail instead of training a node model for the edge variant");
  }

  // Returns false (after printing) on failure.
  bool build(diagram_config** out) const {
    diagram_config* cfg = nullptr;
    if (!check(diagram_config_create(&cfg))) return false;
    *out = cfg;
    if (config_opt_ && config_opt_->count() && !check(diagram_config_load_file(cfg, config_path_.c_str()))) return false;
    for (const auto& [opt, idx] : options_) {
      if (!opt->count()) continue;
      const auto& [key, value] = values_[idx];
      if (!check(diagram_config_set(cfg, key.c_str(), value.c_str()))) return false;
    }
    if (no_auto_node_ && no_auto_node_->count() && !check(diagram_config_set(cfg, "auto_node", "false"))) return false;
    return check(diagram_config_validate(cfg));
  }

  static bool check(diagram_status s) {
    if (s == DIAGRAM_OK) return true;
    std::fprintf(stderr, "error (%s): %s\n", diagram_status_name(s), diagram_last_error());
    last_status = s;
    return false;
  }

  static inline diagram_status last_status = DIAGRAM_OK;

 private:
  std::vector<std::pair<std::string, std::string>> values_;
  std::vector<std::pair<CLI::Option*, std::size_t>> options_;
  CLI::Option* config_opt_ = nullptr;
  CLI::Option* no_auto_node_ = nullptr;
  std::string config_path_;
};

std::string get(const diagram_config* cfg, const char* key) {
  char* v = nullptr;
  if (!Options::check(diagram_config_get(cfg, key, &v))) return {};
  std::string s = v;
  diagram_string_free(v);
  return s;
}

int fail_code() { return Options::last_status == DIAGRAM_OK ? 1 : static_cast<int>(Options::last_status); }

void print_progress(const char* phase, size_t epoch, double mean_loss, double seconds, void*) {
  std::printf("%s epoch %zu  mean loss %.6g  (%.3gs)\n", phase, epoch, mean_loss, seconds);
  std::fflush(stdout);
}

int cmd_info(const Options& opts, bool json) {
  diagram_config* cfg = nullptr;
  if (!opts.build(&cfg)) return diagram_config_destroy(cfg), fail_code();
  diagram_dataset* ds = nullptr;
  int rc = 0;
  char* text = nullptr;
  if (Options::check(diagram_dataset_load(cfg, &ds)) &&
      Options::check(json ? diagram_dataset_summary_json(ds, &text) : diagram_dataset_summary_text(ds, &text))) {
    std::printf("%s%s", text, json ? "\n" : "");
    diagram_string_free(text);
  } else {
    rc = fail_code();
  }
  diagram_dataset_destroy(ds);
  diagram_config_destroy(cfg);
  return rc;
}

int cmd_train(const Options& opts) {
  diagram_config* cfg = nullptr;
  if (!opts.build(&cfg)) return diagram_config_destroy(cfg), fail_code();
  char* summary = nullptr;
  int rc = 0;
  if (Options::check(diagram_train(cfg, print_progress, nullptr, &summary))) {
    std::printf("%s\n", summary);
    diagram_string_free(summary);
  } else {
    rc = fail_code();
  }
  diagram_config_destroy(cfg);
  return rc;
}

int cmd_export(const Options& opts) {
  diagram_config* cfg = nullptr;
  if (!opts.build(&cfg)) return diagram_config_destroy(cfg), fail_code();
  int rc = 0;
  const auto emb_path = get(cfg, "embeddings");
  const auto out = get(cfg, "out");
  if (!emb_path.empty()) {
    // Re-encode an embedding file.
    diagram_embeddings* emb = nullptr;
    if (Options::check(diagram_embeddings_load(emb_path.c_str(), &emb)) &&
        Options::check(diagram_embeddings_save(emb, out.c_str(), get(cfg, "format") == "binary")))
      std::printf("wrote %s\n", out.c_str());
    else
      rc = fail_code();
    diagram_embeddings_destroy(emb);
  } else {
    diagram_dataset* ds = nullptr;
    if (Options::check(diagram_dataset_load(cfg, &ds)) && Options::check(diagram_dataset_export(ds, out.c_str())))
      std::printf("wrote %s/edges.tsv, %s/features.tsv, %s/labels.tsv\n", out.c_str(), out.c_str(), out.c_str());
    else
      rc = fail_code();
    diagram_dataset_destroy(ds);
  }
  diagram_config_destroy(cfg);
  return rc;
}

int cmd_eval(const Options& opts, const std::string& kind) {
  diagram_config* cfg = nullptr;
  if (!opts.build(&cfg)) return diagram_config_destroy(cfg), fail_code();
  const auto emb_path = get(cfg, "embeddings");
  if (emb_path.empty()) {
    std::fprintf(stderr, "error: --embeddings is required\n");
    diagram_config_destroy(cfg);
    return 1;
  }
  int rc = 0;
  diagram_embeddings* emb = nullptr;
  diagram_report* report = nullptr;
  char* csv = nullptr;
  const auto out = get(cfg, "out");
  if (Options::check(diagram_embeddings_load(emb_path.c_str(), &emb)) &&
      Options::check(diagram_eval(cfg, kind.c_str(), emb, &report)) && Options::check(diagram_report_csv(report, &csv)) &&
      Options::check(diagram_report_write(report, out.c_str()))) {
    std::printf("%s", csv);
    std::printf("wrote %s/%s.json and %s/%s.csv\n", out.c_str(), kind.c_str(), out.c_str(), kind.c_str());
  } else {
    rc = fail_code();
  }
  diagram_string_free(csv);
  diagram_report_destroy(report);
  diagram_embeddings_destroy(emb);
  diagram_config_destroy(cfg);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direction-aware attributed graph embeddings"};
  app.set_version_flag("--version", diagram_version());
  app.require_subcommand(1);

  Options info_opts, train_opts, export_opts;
  bool info_json = false;
  auto* info = app.add_subcommand("info", "print a dataset summary");
  info_opts.add_config(info);
  info_opts.add(info, kDatasetFlags);
  info->add_flag("--json", info_json, "print JSON");

  auto* train = app.add_subcommand("train", "train a model and write checkpoint, embeddings and loss trace");
  train_opts.add_config(train);
  train_opts.add(train, kDatasetFlags);
  train_opts.add(train, kTrainFlags);
  train_opts.add(train, kCommonFlags);
  train_opts.add_no_auto_node(train);

  auto* exp = app.add_subcommand("export", "write dataset tables, or re-encode an embedding file");
  export_opts.add_config(exp);
  export_opts.add(exp, kDatasetFlags);
  export_opts.add(exp, kExportFlags);

  auto* eval = app.add_subcommand("eval", "evaluate embeddings");
  eval->require_subcommand(1);
  std::map<std::string, Options> eval_opts;
  for (const char* kind : {"reconstruct", "linkpred", "classify"}) {
    auto* sub = eval->add_subcommand(kind, std::string("run the ") + kind + " experiment");
    auto& o = eval_opts[kind];
    o.add_config(sub);
    o.add(sub, kDatasetFlags);
    o.add(sub, kEvalFlags);
    o.add(sub, kCommonFlags);
  }

  CLI11_PARSE(app, argc, argv);

  if (info->parsed()) return cmd_info(info_opts, info_json);
  if (train->parsed()) return cmd_train(train_opts);
  if (exp->parsed()) return cmd_export(export_opts);
  for (auto& [kind, o] : eval_opts)
    if (eval->get_subcommand(kind)->parsed()) return cmd_eval(o, kind);
  return 1;
}
