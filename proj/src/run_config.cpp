#include "run_config.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace diagram {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  fail(ErrorCode::invalid_argument, "invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) bad_value(key, value, "a nonnegative integer");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size() || !std::isfinite(v)) bad_value(key, value, "a number");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "true|false");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + fmt(items[i]);
  return out;
}

// Shortest form that reads back to the same value.
std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k{
      "dataset",     "content",    "cites",       "data_dir",     "features",     "variant",    "epochs",
      "node_epochs", "batch_size", "lr",          "dropout",      "mu",           "seed",       "checkpoint",
      "auto_node",   "holdout_p",  "k_list",      "p",            "ratios",       "constructors", "scorer",
      "node_features", "repetitions", "folds",    "embeddings",   "format",       "out"};
  return k;
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(raw_value);
  if (key == "dataset") dataset = value;
  else if (key == "content") content_path = value;
  else if (key == "cites") cites_path = value;
  else if (key == "data_dir") data_dir = value;
  else if (key == "features") features = io::parse_feature_mode(value);
  else if (key == "variant") {
    if (value != "node" && value != "edge") bad_value(key, value, "node|edge");
    variant = value;
  } else if (key == "epochs") epochs = value.empty() ? std::nullopt : std::optional(parse_u64(key, value));
  else if (key == "node_epochs") node_epochs = value.empty() ? std::nullopt : std::optional(parse_u64(key, value));
  else if (key == "batch_size") batch_size = parse_u64(key, value);
  else if (key == "lr" || key == "learning_rate") learning_rate = parse_double(key, value);
  else if (key == "dropout") dropout = value.empty() ? std::nullopt : std::optional(parse_double(key, value));
  else if (key == "mu") mu = parse_double(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "auto_node") auto_node = parse_bool(key, value);
  else if (key == "holdout_p") holdout_p = value.empty() ? std::nullopt : std::optional(parse_double(key, value));
  else if (key == "k_list") {
    k_list.clear();
    for (const auto& item : split_list(value)) k_list.push_back(parse_u64(key, item));
  } else if (key == "p") p = parse_double(key, value);
  else if (key == "ratios") {
    ratios.clear();
    // Values above 1 are percentages.
    for (const auto& item : split_list(value)) {
      double r = parse_double(key, item);
      ratios.push_back(r > 1.0 ? r / 100.0 : r);
    }
  } else if (key == "constructors") {
    constructors.clear();
    for (const auto& item : split_list(value)) {
      if (lower(item) == "all") {
        constructors.assign(std::begin(eval::kAllEdgeFeatures), std::end(eval::kAllEdgeFeatures));
        break;
      }
      constructors.push_back(eval::parse_edge_feature(item));
    }
  } else if (key == "scorer") scorer = eval::parse_scorer_mode(value);
  else if (key == "node_features") node_features = eval::parse_node_features(value);
  else if (key == "repetitions") repetitions = parse_u64(key, value);
  else if (key == "folds") folds = parse_u64(key, value);
  else if (key == "embeddings") embeddings = value;
  else if (key == "format") {
    if (value != "text" && value != "binary") bad_value(key, value, "text|binary");
    format = value;
  } else if (key == "out") out = value;
  else fail(ErrorCode::invalid_argument, "unknown configuration key '" + raw_key + "'");
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::apply(const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) set(k, v);
}

std::string RunConfig::get(const std::string& raw_key) const {
  std::string key = raw_key;
  std::replace(key.begin(), key.end(), '-', '_');
  auto opt_u = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); };
  auto opt_d = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  if (key == "dataset") return dataset;
  if (key == "content") return content_path;
  if (key == "cites") return cites_path;
  if (key == "data_dir") return data_dir;
  if (key == "features") return io::to_string(features);
  if (key == "variant") return variant;
  if (key == "epochs") return opt_u(epochs);
  if (key == "node_epochs") return opt_u(node_epochs);
  if (key == "batch_size") return std::to_string(batch_size);
  if (key == "lr" || key == "learning_rate") return num(learning_rate);
  if (key == "dropout") return opt_d(dropout);
  if (key == "mu") return num(mu);
  if (key == "seed") return std::to_string(seed);
  if (key == "checkpoint") return checkpoint;
  if (key == "auto_node") return auto_node ? "true" : "false";
  if (key == "holdout_p") return opt_d(holdout_p);
  if (key == "k_list") return join(k_list, [](std::size_t k) { return std::to_string(k); });
  if (key == "p") return num(p);
  if (key == "ratios") return join(ratios, num);
  if (key == "constructors") return join(constructors, [](eval::EdgeFeature f) { return eval::to_string(f); });
  if (key == "scorer") return eval::to_string(scorer);
  if (key == "node_features") return eval::to_string(node_features);
  if (key == "repetitions") return std::to_string(repetitions);
  if (key == "folds") return std::to_string(folds);
  if (key == "embeddings") return embeddings;
  if (key == "format") return format;
  if (key == "out") return out;
  fail(ErrorCode::invalid_argument, "unknown configuration key '" + raw_key + "'");
}

void RunConfig::validate() const {
  if (batch_size == 0) fail(ErrorCode::invalid_argument, "batch_size must be positive");
  if (!(learning_rate > 0.0)) fail(ErrorCode::invalid_argument, "lr must be positive");
  const double d = resolved_dropout();
  if (!(d >= 0.0 && d < 1.0)) fail(ErrorCode::invalid_argument, "dropout must lie in [0, 1)");
  if (!(mu > 1.0)) fail(ErrorCode::invalid_argument, "mu must exceed 1");
  if (!(p > 0.0 && p <= 100.0)) fail(ErrorCode::invalid_argument, "p must lie in (0, 100]");
  if (holdout_p && !(*holdout_p > 0.0 && *holdout_p <= 100.0))
    fail(ErrorCode::invalid_argument, "holdout_p must lie in (0, 100]");
  for (auto k : k_list)
    if (k == 0) fail(ErrorCode::invalid_argument, "K values must be positive");
  for (auto r : ratios)
    if (!(r > 0.0 && r < 1.0)) fail(ErrorCode::invalid_argument, "train ratios must lie in (0, 1) or (1, 100) percent");
  if (repetitions == 0) fail(ErrorCode::invalid_argument, "repetitions must be positive");
  if (folds < 2) fail(ErrorCode::invalid_argument, "folds must be at least 2");
}

double RunConfig::resolved_dropout() const {
  if (dropout) return *dropout;
  const auto name = lower(dataset.empty() ? content_path : dataset);
  return name.find("citeseer") != std::string::npos ? 0.1 : 0.2;
}

std::string RunConfig::resolved_data_dir() const {
  if (!data_dir.empty()) return data_dir;
  if (const char* env = std::getenv("DIAGRAM_DATA_DIR"); env && *env) return env;
  return "data";
}

namespace {

// dataset may be a directory holding <name>.content / <name>.cites, or a
// name looked up under the data directory.
std::string dataset_file(const RunConfig& c, const std::string& ext) {
  if (c.dataset.empty()) fail(ErrorCode::invalid_argument, "no dataset given (set --dataset or --content/--cites)");
  fs::path dir = c.dataset;
  if (!fs::is_directory(dir)) dir = fs::path(c.resolved_data_dir()) / c.dataset;
  const auto stem = fs::path(c.dataset).filename().string();
  fs::path file = dir / (stem + ext);
  if (!fs::exists(file)) {
    // Fall back to the only *.ext file in the directory.
    std::vector<fs::path> found;
    if (fs::is_directory(dir))
      for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ext) found.push_back(e.path());
    if (found.size() == 1) return found.front().string();
    fail(ErrorCode::io, "dataset file not found: " + file.string());
  }
  return file.string();
}

}  // namespace

std::string RunConfig::resolved_content_path() const {
  return content_path.empty() ? dataset_file(*this, ".content") : content_path;
}

std::string RunConfig::resolved_cites_path() const {
  return cites_path.empty() ? dataset_file(*this, ".cites") : cites_path;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : keys()) j[k] = get(k);
  j["dropout"] = resolved_dropout();
  j["lr"] = learning_rate;
  j["mu"] = mu;
  j["seed"] = seed;
  j["p"] = p;
  j["batch_size"] = batch_size;
  j["k_list"] = k_list;
  j["ratios"] = ratios;
  return j;
}

std::string RunConfig::to_text() const {
  std::string s;
  for (const auto& k : keys()) s += k + " = " + get(k) + "\n";
  return s;
}

std::string RunConfig::training_fingerprint() const {
  std::string s;
  for (const char* k : {"features", "variant", "epochs", "node_epochs", "batch_size", "lr", "mu", "seed", "auto_node",
                        "holdout_p"})
    s += std::string(k) + "=" + get(k) + "\n";
  s += "dropout=" + num(resolved_dropout()) + "\n";
  return io::fnv1a_hex(s);
}

}  // namespace diagram
