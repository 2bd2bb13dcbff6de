#include "ncl/config.hpp"

#include <fstream>
#include <set>

#include "ncl/errors.hpp"
#include "ncl/rng.hpp"

namespace ncl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

MembershipMode parse_mode(const std::string& name) {
  if (name == "hard") return MembershipMode::Hard;
  if (name == "soft") return MembershipMode::Soft;
  throw ConfigError("membership_mode must be hard or soft, got '" + name + "'");
}

void reject_unknown(const json& doc, const std::set<std::string>& known, const std::string& where) {
  if (!doc.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) throw ConfigError("unknown key '" + where + key + "'");
}

template <class T>
void read(const json& doc, const char* key, T& out) {
  const auto it = doc.find(key);
  if (it == doc.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "': " + it->dump());
  }
}

}  // namespace

ordered_json to_json(const RunConfig& config) {
  const auto& t = config.train;
  ordered_json doc;
  doc["name"] = config.name;
  doc["snapshot"] = config.snapshot.string();
  doc["checkpoint"] = config.checkpoint.string();
  doc["report_dir"] = config.report_dir.string();
  doc["objective"] = to_string(t.objective);
  doc["dim"] = t.dim;
  doc["layers"] = t.layers;
  doc["layer_weights"] = t.layer_weights;
  doc["normalize"] = t.normalize;
  doc["batch_size"] = t.batch_size;
  doc["learning_rate"] = t.learning_rate;
  doc["init_scale"] = t.init_scale;
  doc["alpha"] = t.alpha;
  doc["epsilon_sq"] = t.epsilon_sq;
  doc["tau"] = t.tau;
  doc["lambda"] = t.lambda;
  doc["clusters_user"] = t.clusters_user;
  doc["clusters_item"] = t.clusters_item;
  doc["membership_mode"] = to_string(t.membership_mode);
  doc["membership_prune"] = t.membership_prune;
  doc["classifier_hidden"] = t.classifier_hidden;
  doc["classifier_steps"] = t.classifier_steps;
  doc["classifier_lr"] = t.classifier_lr;
  doc["ipot"] = {{"iterations", t.ipot.iterations},
                 {"inner_iterations", t.ipot.inner_iterations},
                 {"beta", t.ipot.beta},
                 {"tol", t.ipot.tol}};
  doc["cooccurrence"] = {
      {"kind", t.cooccurrence.kind == Threshold::Kind::Quantile ? "quantile" : "absolute"},
      {"value", t.cooccurrence.value}};
  doc["membership_sample"] = t.membership_sample;
  doc["max_epochs"] = t.max_epochs;
  doc["patience"] = t.patience;
  doc["init_seed"] = t.init_seed;
  doc["batch_seed"] = t.batch_seed;
  doc["eval_seed"] = t.eval_seed;
  doc["eval_cutoffs"] = t.eval_cutoffs;
  doc["valid_user_cap"] = t.valid_user_cap;
  return doc;
}

RunConfig run_config_from_json(const json& doc) {
  static const std::set<std::string> known = {
      "name",          "snapshot",         "checkpoint",      "report_dir",        "objective",
      "dim",           "layers",           "layer_weights",   "normalize",         "batch_size",
      "learning_rate", "init_scale",       "alpha",           "epsilon_sq",        "tau",
      "lambda",        "clusters_user",    "clusters_item",   "membership_mode",   "membership_prune",
      "classifier_hidden", "classifier_steps", "classifier_lr", "ipot",            "cooccurrence",
      "membership_sample", "max_epochs",   "patience",        "init_seed",         "batch_seed",
      "eval_seed",     "eval_cutoffs",     "valid_user_cap"};
  reject_unknown(doc, known, "");

  RunConfig c;
  auto& t = c.train;
  read(doc, "name", c.name);
  std::string path;
  if (doc.contains("snapshot")) read(doc, "snapshot", path), c.snapshot = path;
  if (doc.contains("checkpoint")) read(doc, "checkpoint", path), c.checkpoint = path;
  if (doc.contains("report_dir")) read(doc, "report_dir", path), c.report_dir = path;
  if (doc.contains("objective")) {
    std::string name;
    read(doc, "objective", name);
    t.objective = parse_objective(name);
  }
  read(doc, "dim", t.dim);
  read(doc, "layers", t.layers);
  read(doc, "layer_weights", t.layer_weights);
  read(doc, "normalize", t.normalize);
  read(doc, "batch_size", t.batch_size);
  read(doc, "learning_rate", t.learning_rate);
  read(doc, "init_scale", t.init_scale);
  read(doc, "alpha", t.alpha);
  read(doc, "epsilon_sq", t.epsilon_sq);
  read(doc, "tau", t.tau);
  read(doc, "lambda", t.lambda);
  read(doc, "clusters_user", t.clusters_user);
  read(doc, "clusters_item", t.clusters_item);
  if (doc.contains("membership_mode")) {
    std::string mode;
    read(doc, "membership_mode", mode);
    t.membership_mode = parse_mode(mode);
  }
  read(doc, "membership_prune", t.membership_prune);
  read(doc, "classifier_hidden", t.classifier_hidden);
  read(doc, "classifier_steps", t.classifier_steps);
  read(doc, "classifier_lr", t.classifier_lr);
  if (const auto it = doc.find("ipot"); it != doc.end()) {
    reject_unknown(*it, {"iterations", "inner_iterations", "beta", "tol"}, "ipot.");
    read(*it, "iterations", t.ipot.iterations);
    read(*it, "inner_iterations", t.ipot.inner_iterations);
    read(*it, "beta", t.ipot.beta);
    read(*it, "tol", t.ipot.tol);
  }
  if (const auto it = doc.find("cooccurrence"); it != doc.end()) {
    reject_unknown(*it, {"kind", "value"}, "cooccurrence.");
    std::string kind = "quantile";
    read(*it, "kind", kind);
    if (kind == "quantile") t.cooccurrence.kind = Threshold::Kind::Quantile;
    else if (kind == "absolute") t.cooccurrence.kind = Threshold::Kind::Absolute;
    else throw ConfigError("cooccurrence.kind must be quantile or absolute");
    read(*it, "value", t.cooccurrence.value);
  }
  read(doc, "membership_sample", t.membership_sample);
  read(doc, "max_epochs", t.max_epochs);
  read(doc, "patience", t.patience);
  read(doc, "init_seed", t.init_seed);
  read(doc, "batch_seed", t.batch_seed);
  read(doc, "eval_seed", t.eval_seed);
  read(doc, "eval_cutoffs", t.eval_cutoffs);
  read(doc, "valid_user_cap", t.valid_user_cap);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(doc);
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override must look like key=value: " + std::string(assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json doc = to_json(config);
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
  config = run_config_from_json(doc);
}

void apply_global_seed(RunConfig& config, std::uint64_t seed) {
  config.train.init_seed = stream_id(seed, 1);
  config.train.batch_seed = stream_id(seed, 2);
  config.train.eval_seed = stream_id(seed, 3);
}

}  // namespace ncl
