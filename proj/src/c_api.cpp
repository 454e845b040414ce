#include "diagram/diagram.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "embeddings_io.hpp"
#include "error.hpp"
#include "pipeline.hpp"
#include "run_config.hpp"

struct diagram_config {
  diagram::RunConfig cfg;
};

struct diagram_dataset {
  diagram::pipeline::LoadedDataset ds;
};

struct diagram_embeddings {
  diagram::model::EmbeddingSet set;
};

struct diagram_report {
  diagram::eval::EvalReport report;
};

namespace {

thread_local std::string last_error;

diagram_status to_status(diagram::ErrorCode code) {
  switch (code) {
    case diagram::ErrorCode::invalid_argument: return DIAGRAM_ERR_INVALID_ARGUMENT;
    case diagram::ErrorCode::io: return DIAGRAM_ERR_IO;
    case diagram::ErrorCode::parse: return DIAGRAM_ERR_PARSE;
    case diagram::ErrorCode::shape: return DIAGRAM_ERR_SHAPE;
    case diagram::ErrorCode::numeric: return DIAGRAM_ERR_NUMERIC;
    case diagram::ErrorCode::mismatch: return DIAGRAM_ERR_MISMATCH;
    case diagram::ErrorCode::state: return DIAGRAM_ERR_STATE;
  }
  return DIAGRAM_ERR_INTERNAL;
}

template <typename F>
diagram_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return DIAGRAM_OK;
  } catch (const diagram::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return DIAGRAM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DIAGRAM_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) diagram::fail(diagram::ErrorCode::invalid_argument, std::string(what) + " must not be null");
}

char* copy_out(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* diagram_version(void) { return "1.0.0"; }

const char* diagram_last_error(void) { return last_error.c_str(); }

const char* diagram_status_name(diagram_status status) {
  switch (status) {
    case DIAGRAM_OK: return "ok";
    case DIAGRAM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DIAGRAM_ERR_IO: return "i/o error";
    case DIAGRAM_ERR_PARSE: return "parse error";
    case DIAGRAM_ERR_SHAPE: return "shape error";
    case DIAGRAM_ERR_NUMERIC: return "numeric error";
    case DIAGRAM_ERR_MISMATCH: return "mismatch";
    case DIAGRAM_ERR_STATE: return "state error";
    case DIAGRAM_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

void diagram_string_free(char* s) { std::free(s); }

diagram_status diagram_config_create(diagram_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new diagram_config{};
  });
}

void diagram_config_destroy(diagram_config* cfg) { delete cfg; }

diagram_status diagram_config_load_file(diagram_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    cfg->cfg.load_file(path);
  });
}

diagram_status diagram_config_set(diagram_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

diagram_status diagram_config_get(const diagram_config* cfg, const char* key, char** value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    *value = copy_out(cfg->cfg.get(key));
  });
}

diagram_status diagram_config_to_json(const diagram_config* cfg, char** json) {
  return guarded([&] {
    require(cfg, "cfg");
    require(json, "json");
    *json = copy_out(cfg->cfg.to_json().dump(2));
  });
}

diagram_status diagram_config_to_text(const diagram_config* cfg, char** text) {
  return guarded([&] {
    require(cfg, "cfg");
    require(text, "text");
    *text = copy_out(cfg->cfg.to_text());
  });
}

diagram_status diagram_config_validate(const diagram_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->cfg.validate();
  });
}

diagram_status diagram_dataset_load(const diagram_config* cfg, diagram_dataset** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = new diagram_dataset{diagram::pipeline::load_dataset(cfg->cfg)};
  });
}

void diagram_dataset_destroy(diagram_dataset* ds) { delete ds; }

diagram_status diagram_dataset_counts(const diagram_dataset* ds, size_t* nodes, size_t* edges, size_t* features,
                                      size_t* labels) {
  return guarded([&] {
    require(ds, "ds");
    if (nodes) *nodes = ds->ds.data.graph.node_count();
    if (edges) *edges = ds->ds.data.graph.edge_count();
    if (features) *features = ds->ds.features.cols();
    if (labels) *labels = ds->ds.data.labels.class_count();
  });
}

diagram_status diagram_dataset_summary_json(const diagram_dataset* ds, char** json) {
  return guarded([&] {
    require(ds, "ds");
    require(json, "json");
    *json = copy_out(diagram::pipeline::summary_json(ds->ds).dump(2));
  });
}

diagram_status diagram_dataset_summary_text(const diagram_dataset* ds, char** text) {
  return guarded([&] {
    require(ds, "ds");
    require(text, "text");
    *text = copy_out(diagram::pipeline::summary_text(ds->ds));
  });
}

diagram_status diagram_dataset_export(const diagram_dataset* ds, const char* dir) {
  return guarded([&] {
    require(ds, "ds");
    require(dir, "dir");
    diagram::pipeline::export_dataset(ds->ds, dir);
  });
}

diagram_status diagram_train(const diagram_config* cfg, diagram_progress_fn progress, void* user, char** summary_json) {
  return guarded([&] {
    require(cfg, "cfg");
    diagram::pipeline::Progress cb;
    if (progress)
      cb = [progress, user](const std::string& phase, const diagram::model::EpochStats& s) {
        progress(phase.c_str(), s.epoch, s.mean_loss, s.seconds, user);
      };
    const auto written = diagram::pipeline::train(cfg->cfg, cb);
    if (summary_json) {
      nlohmann::json j = nlohmann::json::array();
      for (const auto& a : written)
        j.push_back({{"variant", a.variant},
                     {"checkpoint", a.checkpoint_path},
                     {"embeddings", a.embeddings_path},
                     {"trace", a.trace_path},
                     {"config", a.config_path},
                     {"config_fingerprint", a.config_fingerprint},
                     {"dataset_fingerprint", a.dataset_fingerprint},
                     {"epochs", a.epochs},
                     {"final_mean_loss", a.final_mean_loss}});
      *summary_json = copy_out(j.dump(2));
    }
  });
}

diagram_status diagram_embeddings_load(const char* path, diagram_embeddings** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new diagram_embeddings{diagram::model::import_embeddings(path)};
  });
}

void diagram_embeddings_destroy(diagram_embeddings* emb) { delete emb; }

diagram_status diagram_embeddings_save(const diagram_embeddings* emb, const char* path, int binary) {
  return guarded([&] {
    require(emb, "emb");
    require(path, "path");
    diagram::model::export_embeddings(emb->set, path,
                                      binary ? diagram::model::EmbeddingFormat::binary
                                             : diagram::model::EmbeddingFormat::text);
  });
}

diagram_status diagram_embeddings_shape(const diagram_embeddings* emb, size_t* nodes, size_t* dim) {
  return guarded([&] {
    require(emb, "emb");
    if (nodes) *nodes = emb->set.node_count();
    if (dim) *dim = emb->set.dim();
  });
}

diagram_status diagram_embeddings_row(const diagram_embeddings* emb, diagram_channel channel, size_t row,
                                      double* values, size_t capacity) {
  return guarded([&] {
    require(emb, "emb");
    require(values, "values");
    const auto& s = emb->set;
    if (row >= s.node_count()) diagram::fail(diagram::ErrorCode::invalid_argument, "row out of range");
    if (capacity < s.dim()) diagram::fail(diagram::ErrorCode::invalid_argument, "buffer smaller than the embedding dim");
    if (channel != DIAGRAM_CHANNEL_Z && channel != DIAGRAM_CHANNEL_O && channel != DIAGRAM_CHANNEL_I)
      diagram::fail(diagram::ErrorCode::invalid_argument, "unknown channel");
    const auto& m = channel == DIAGRAM_CHANNEL_Z ? s.z : channel == DIAGRAM_CHANNEL_O ? s.o : s.i;
    for (size_t j = 0; j < s.dim(); ++j) values[j] = m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j));
  });
}

diagram_status diagram_embeddings_meta(const diagram_embeddings* emb, const char* field, char** value) {
  return guarded([&] {
    require(emb, "emb");
    require(field, "field");
    require(value, "value");
    const std::string f = field;
    const auto& s = emb->set;
    if (f == "mode") *value = copy_out(s.mode);
    else if (f == "config") *value = copy_out(s.config_fingerprint);
    else if (f == "dataset") *value = copy_out(s.dataset_fingerprint);
    else if (f.rfind("id:", 0) == 0) {
      const auto row = std::stoull(f.substr(3));
      if (row >= s.node_count()) diagram::fail(diagram::ErrorCode::invalid_argument, "row out of range");
      *value = copy_out(s.node_ids[row]);
    } else {
      diagram::fail(diagram::ErrorCode::invalid_argument, "unknown embedding field '" + f + "'");
    }
  });
}

diagram_status diagram_eval(const diagram_config* cfg, const char* kind, const diagram_embeddings* emb,
                            diagram_report** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(kind, "kind");
    require(emb, "emb");
    require(out, "out");
    const auto k = diagram::pipeline::parse_eval_kind(kind);
    *out = new diagram_report{diagram::pipeline::evaluate(cfg->cfg, k, emb->set)};
  });
}

void diagram_report_destroy(diagram_report* report) { delete report; }

diagram_status diagram_report_json(const diagram_report* report, char** json) {
  return guarded([&] {
    require(report, "report");
    require(json, "json");
    *json = copy_out(report->report.json.dump(2));
  });
}

diagram_status diagram_report_csv(const diagram_report* report, char** csv) {
  return guarded([&] {
    require(report, "report");
    require(csv, "csv");
    *csv = copy_out(report->report.csv);
  });
}

diagram_status diagram_report_write(const diagram_report* report, const char* dir) {
  return guarded([&] {
    require(report, "report");
    require(dir, "dir");
    diagram::pipeline::write_report(report->report, dir);
  });
}

}  // extern "C"
