#include "nounprobe/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "nounprobe/error.hpp"
#include "nounprobe/protocol.hpp"
#include "nounprobe/rng.hpp"
#include "nounprobe/synthetic.hpp"

namespace nounprobe {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& into, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void require_path(const fs::path& p, const std::string& what) {
  std::error_code ec;
  if (!fs::exists(p, ec)) throw ConfigError(what + " '" + p.string() + "' does not exist");
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  only_keys(j, "config", {"lexicon", "templates", "tasks", "backends", "nouns", "samples_per_cell", "seed",
                          "output_dir", "workers", "batch_size", "max_retries", "analysis", "corpora", "fewshot"});
  RunConfig c;
  std::string s;
  if (j.contains("lexicon")) {
    read(j, "lexicon", s, "config");
    c.lexicon = resolve(base, s);
  }
  read(j, "templates", c.templates, "config");
  if (c.templates != "builtin") c.templates = resolve(base, c.templates).string();
  read(j, "tasks", c.tasks, "config");
  if (j.contains("nouns")) {
    const auto& n = j["nouns"];
    if (n.is_string() && n.get<std::string>() == "all") {
      c.nouns.clear();
    } else {
      read(j, "nouns", c.nouns, "config");
    }
  }
  read(j, "samples_per_cell", c.samples_per_cell, "config");
  read(j, "seed", c.seed, "config");
  if (j.contains("output_dir")) {
    s.clear();
    read(j, "output_dir", s, "config");
    c.output_dir = resolve(base, s);
  }
  read(j, "workers", c.workers, "config");
  read(j, "batch_size", c.batch_size, "config");
  read(j, "max_retries", c.max_retries, "config");
  if (j.contains("analysis")) {
    const auto& a = j["analysis"];
    only_keys(a, "analysis", {"alpha", "standardize"});
    read(a, "alpha", c.alpha, "analysis");
    read(a, "standardize", c.standardize_pca, "analysis");
  }
  if (j.contains("backends")) {
    if (!j["backends"].is_array()) throw ConfigError("config: 'backends' must be an array");
    for (const auto& b : j["backends"]) {
      only_keys(b, "backend", {"id", "kind", "corpus", "synthetic", "order", "k", "finetune_weight", "command", "host",
                               "port", "epochs"});
      BackendConfig bc;
      read(b, "id", bc.id, "backend");
      const std::string where = "backend '" + bc.id + "'";
      read(b, "kind", bc.kind, where);
      if (b.contains("corpus")) {
        s.clear();
        read(b, "corpus", s, where);
        bc.corpus = resolve(base, s);
      }
      if (b.contains("synthetic")) {
        const auto& sy = b["synthetic"];
        only_keys(sy, where + " synthetic", {"controls", "repeats"});
        SyntheticCorpusConfig sc;
        read(sy, "controls", sc.controls, where);
        read(sy, "repeats", sc.repeats, where);
        bc.synthetic = sc;
      }
      read(b, "order", bc.ngram.order, where);
      read(b, "k", bc.ngram.k, where);
      read(b, "finetune_weight", bc.ngram.finetune_weight, where);
      read(b, "command", bc.command, where);
      read(b, "host", bc.host, where);
      read(b, "port", bc.port, where);
      if (b.contains("epochs")) {
        int e = 0;
        read(b, "epochs", e, where);
        bc.epochs = e;
      }
      c.backends.push_back(std::move(bc));
    }
  }
  if (j.contains("corpora")) {
    if (!j["corpora"].is_array()) throw ConfigError("config: 'corpora' must be an array");
    for (const auto& k : j["corpora"]) {
      only_keys(k, "corpus", {"id", "path"});
      CorpusConfig cc;
      read(k, "id", cc.id, "corpus");
      s.clear();
      read(k, "path", s, "corpus");
      cc.path = resolve(base, s);
      c.corpora.push_back(std::move(cc));
    }
  }
  if (j.contains("fewshot")) {
    const auto& f = j["fewshot"];
    only_keys(f, "fewshot", {"specs", "n_sentences", "samples", "tokens"});
    read(f, "specs", c.fewshot.specs, "fewshot");
    read(f, "n_sentences", c.fewshot.n_sentences, "fewshot");
    if (f.contains("samples")) {
      std::size_t n = 0;
      read(f, "samples", n, "fewshot");
      c.fewshot.samples = n;
    }
    if (f.contains("tokens")) {
      only_keys(f["tokens"], "fewshot tokens", {"singular", "plural"});
      read(f["tokens"], "singular", c.fewshot.tokens.singular, "fewshot tokens");
      read(f["tokens"], "plural", c.fewshot.tokens.plural, "fewshot tokens");
    }
  }
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["lexicon"] = lexicon.string();
  j["templates"] = templates;
  j["tasks"] = tasks;
  j["nouns"] = nouns.empty() ? json("all") : json(nouns);
  j["samples_per_cell"] = samples_per_cell;
  j["seed"] = seed;
  j["output_dir"] = output_dir.string();
  j["workers"] = workers;
  j["batch_size"] = batch_size;
  j["max_retries"] = max_retries;
  j["analysis"] = {{"alpha", alpha}, {"standardize", standardize_pca}};
  j["backends"] = json::array();
  for (const auto& b : backends) {
    json jb{{"id", b.id}, {"kind", b.kind}};
    if (b.kind == "ngram") {
      if (!b.corpus.empty()) jb["corpus"] = b.corpus.string();
      if (b.synthetic) jb["synthetic"] = {{"controls", b.synthetic->controls}, {"repeats", b.synthetic->repeats}};
      jb["order"] = b.ngram.order;
      jb["k"] = b.ngram.k;
      jb["finetune_weight"] = b.ngram.finetune_weight;
    } else if (b.kind == "subprocess") {
      jb["command"] = b.command;
    } else if (b.kind == "tcp") {
      jb["host"] = b.host;
      jb["port"] = b.port;
    }
    if (b.epochs) jb["epochs"] = *b.epochs;
    j["backends"].push_back(std::move(jb));
  }
  j["corpora"] = json::array();
  for (const auto& c : corpora) j["corpora"].push_back({{"id", c.id}, {"path", c.path.string()}});
  j["fewshot"] = {{"specs", fewshot.specs},
                  {"n_sentences", fewshot.n_sentences},
                  {"tokens", {{"singular", fewshot.tokens.singular}, {"plural", fewshot.tokens.plural}}}};
  if (fewshot.samples) j["fewshot"]["samples"] = *fewshot.samples;
  return j;
}

void RunConfig::validate() const {
  if (lexicon.empty()) throw ConfigError("config: 'lexicon' is required");
  require_path(lexicon, "lexicon");
  if (templates != "builtin") require_path(templates, "template file");
  if (samples_per_cell == 0) throw ConfigError("config: samples_per_cell must be at least 1");
  if (workers == 0) throw ConfigError("config: workers must be at least 1");
  if (batch_size == 0) throw ConfigError("config: batch_size must be at least 1");
  if (max_retries < 0) throw ConfigError("config: max_retries must be non-negative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: alpha must lie in (0, 1)");
  if (fewshot.n_sentences == 0) throw ConfigError("fewshot: n_sentences must be at least 1");
  if (fewshot.samples && *fewshot.samples == 0) throw ConfigError("fewshot: samples must be at least 1");
  if (fewshot.tokens.singular.empty() || fewshot.tokens.plural.empty() ||
      fewshot.tokens.singular == fewshot.tokens.plural) {
    throw ConfigError("fewshot: novel tokens must be two different non-empty words");
  }
  std::set<std::string> ids;
  for (const auto& b : backends) {
    if (b.id.empty()) throw ConfigError("backend without an id");
    if (!ids.insert(b.id).second) throw ConfigError("duplicate backend id '" + b.id + "'");
    if (b.kind == "ngram") {
      if (b.corpus.empty() == !b.synthetic) {
        throw ConfigError("backend '" + b.id + "': give exactly one of 'corpus' and 'synthetic'");
      }
      if (!b.corpus.empty()) require_path(b.corpus, "backend '" + b.id + "' corpus");
      if (b.ngram.order < 1) throw ConfigError("backend '" + b.id + "': order must be at least 1");
      if (!(b.ngram.k > 0.0)) throw ConfigError("backend '" + b.id + "': k must be positive");
      if (b.synthetic && b.synthetic->repeats == 0) throw ConfigError("backend '" + b.id + "': repeats must be >= 1");
    } else if (b.kind == "subprocess") {
      if (b.command.empty()) throw ConfigError("backend '" + b.id + "': 'command' is required");
    } else if (b.kind == "tcp") {
      if (b.port == 0) throw ConfigError("backend '" + b.id + "': 'port' is required");
    } else {
      throw ConfigError("backend '" + b.id + "': unknown kind '" + b.kind + "' (ngram, subprocess, tcp)");
    }
    if (b.epochs && *b.epochs < 0) throw ConfigError("backend '" + b.id + "': epochs must be non-negative");
  }
  ids.clear();
  for (const auto& c : corpora) {
    if (c.id.empty()) throw ConfigError("corpus without an id");
    if (!ids.insert(c.id).second) throw ConfigError("duplicate corpus id '" + c.id + "'");
    require_path(c.path, "corpus '" + c.id + "'");
  }
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j, path.parent_path());
}

std::vector<TaskTemplate> load_templates(const RunConfig& cfg) {
  if (cfg.templates == "builtin") return builtin_templates();
  std::ifstream in(cfg.templates);
  if (!in) throw ConfigError("cannot read template file '" + cfg.templates + "'");
  return parse_template_file(in);
}

std::vector<TaskTemplate> selected_tasks(const RunConfig& cfg, const std::vector<TaskTemplate>& all) {
  if (cfg.tasks.empty()) return evaluation_templates(all);
  std::vector<TaskTemplate> out;
  for (const auto& id : cfg.tasks) {
    const TaskTemplate* t = find_template(all, id);
    if (!t || t->role != TemplateRole::Evaluation) throw ConfigError("unknown evaluation task '" + id + "'");
    out.push_back(*t);
  }
  return out;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg, const Lexicon& lex) {
  if (cfg.kind == "ngram") {
    NgramModel model;
    if (cfg.synthetic) {
      const auto corpus = agreement_corpus(lex, cfg.synthetic->controls, cfg.synthetic->repeats);
      model = NgramModel::train(corpus, cfg.ngram);
    } else {
      std::ifstream in(cfg.corpus);
      if (!in) throw ConfigError("cannot read corpus '" + cfg.corpus.string() + "'");
      model = NgramModel::train(in, cfg.ngram);
    }
    return std::make_unique<NgramBackend>(cfg.id, std::move(model));
  }
  ClientOptions opts;
  opts.id = cfg.id;
  std::unique_ptr<Transport> transport;
  if (cfg.kind == "subprocess") {
    transport = std::make_unique<SubprocessTransport>(cfg.command);
  } else if (cfg.kind == "tcp") {
    transport = std::make_unique<TcpTransport>(cfg.host, cfg.port);
  } else {
    throw ConfigError("unknown backend kind '" + cfg.kind + "'");
  }
  return std::make_unique<ProtocolClient>(std::move(transport), opts);
}

}  // namespace nounprobe
