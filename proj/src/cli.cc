#include "nounprobe/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nounprobe/analysis.hpp"
#include "nounprobe/config.hpp"
#include "nounprobe/error.hpp"
#include "nounprobe/fewshot.hpp"
#include "nounprobe/frequency.hpp"
#include "nounprobe/generation.hpp"
#include "nounprobe/protocol.hpp"
#include "nounprobe/scoring.hpp"
#include "nounprobe/svg.hpp"
#include "nounprobe/synthetic.hpp"
#include "nounprobe/text.hpp"

namespace nounprobe {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now(const char* fmt) {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, fmt, &tm);
  return buf;
}

// File-name-safe rendering of an id.
std::string slug(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out;
}

class RunDir {
 public:
  RunDir(const fs::path& output_dir, const std::string& command, const std::string& run_id, json manifest)
      : manifest_(std::move(manifest)) {
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + output_dir.string() + "': " + ec.message());
    std::string id = run_id;
    if (id.empty()) {
      const std::string stem = command + "-" + utc_now("%Y%m%dT%H%M%SZ");
      id = stem;
      for (int k = 2; fs::exists(output_dir / id); ++k) id = stem + "-" + std::to_string(k);
    } else if (fs::exists(output_dir / id)) {
      throw ConfigError("run '" + id + "' already exists in " + output_dir.string() + "; runs are never overwritten");
    }
    dir_ = output_dir / id;
    if (!fs::create_directory(dir_, ec) || ec) throw ConfigError("cannot create run directory '" + dir_.string() + "'");
    manifest_["run_id"] = id;
    manifest_["command"] = command;
    manifest_["started_at"] = utc_now("%Y-%m-%dT%H:%M:%SZ");
    manifest_["status"] = "running";
    manifest_["artifact_list"] = json::array();
    manifest_["versions"] = {{"nounprobe", kVersion}, {"protocol", kProtocolVersion}};
    flush();
  }

  const fs::path& dir() const { return dir_; }
  json& manifest() { return manifest_; }

  void write(const std::string& name, const std::string& content) {
    const fs::path tmp = dir_ / (name + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary);
      out << content;
      if (!out) throw ConfigError("cannot write " + tmp.string());
    }
    fs::rename(tmp, dir_ / name);
    manifest_["artifact_list"].push_back(name);
    flush();
  }

  void finish(const std::string& status, const json& error = nullptr) {
    manifest_["status"] = status;
    manifest_["partial"] = status != "complete";
    manifest_["finished_at"] = utc_now("%Y-%m-%dT%H:%M:%SZ");
    if (!error.is_null()) {
      manifest_["error"] = error;
      std::ofstream(dir_ / "error.json") << error.dump(2) << '\n';
    }
    flush();
  }

 private:
  void flush() {
    std::ofstream(dir_ / "manifest.json") << manifest_.dump(2) << '\n';
  }

  fs::path dir_;
  json manifest_;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::string output_dir;
  std::string run_id;
  std::optional<std::size_t> workers;
  std::vector<std::string> backends;
  std::vector<std::string> nouns;
  std::vector<std::string> tasks;
  std::string lexicon;
};

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("-c,--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  if (config_required) opt->required();
  app->add_option("--seed", c.seed, "override the configured seed");
  app->add_option("--samples", c.samples, "override samples_per_cell");
  app->add_option("-o,--output-dir", c.output_dir, "directory receiving run directories");
  app->add_option("--run-id", c.run_id, "name of the run directory (must not exist)");
  app->add_option("--workers", c.workers, "scoring threads");
  app->add_option("--backend", c.backends, "restrict to these backend ids")->delimiter(',');
  app->add_option("--nouns", c.nouns, "restrict to these noun lemmas")->delimiter(',');
  app->add_option("--tasks", c.tasks, "restrict to these task ids")->delimiter(',');
  app->add_option("--lexicon", c.lexicon, "override the lexicon path");
}

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.samples) cfg.samples_per_cell = *c.samples;
  if (!c.output_dir.empty()) cfg.output_dir = c.output_dir;
  if (c.workers) cfg.workers = *c.workers;
  if (!c.nouns.empty()) cfg.nouns = c.nouns;
  if (!c.tasks.empty()) cfg.tasks = c.tasks;
  if (!c.lexicon.empty()) cfg.lexicon = c.lexicon;
  if (!c.backends.empty()) {
    std::vector<BackendConfig> keep;
    for (const auto& id : c.backends) {
      auto it = std::find_if(cfg.backends.begin(), cfg.backends.end(), [&](const auto& b) { return b.id == id; });
      if (it == cfg.backends.end()) throw ConfigError("no backend '" + id + "' in the configuration");
      keep.push_back(*it);
    }
    cfg.backends = std::move(keep);
  }
  return cfg;
}

json base_manifest(const RunConfig& cfg, const std::vector<std::string>& argv) {
  json m;
  m["config_hash"] = cfg.hash();
  m["seed"] = cfg.seed;
  m["samples_per_cell"] = cfg.samples_per_cell;
  json ids = json::array();
  for (const auto& b : cfg.backends) ids.push_back(b.id);
  m["backend_ids"] = ids;
  m["config"] = cfg.to_json();
  m["argv"] = argv;
  return m;
}

// First line of every tabular artifact; deliberately free of run-specific values.
std::string provenance_line(const RunConfig& cfg) {
  return "# seed=" + std::to_string(cfg.seed) + " samples_per_cell=" + std::to_string(cfg.samples_per_cell) +
         " config_hash=" + cfg.hash() + "\n";
}

std::string svg_comment(const RunConfig& cfg) {
  return "<!-- seed=" + std::to_string(cfg.seed) + " samples_per_cell=" + std::to_string(cfg.samples_per_cell) +
         " config_hash=" + cfg.hash() + " -->\n";
}

struct Prepared {
  Lexicon lexicon;
  std::vector<TaskTemplate> all_templates;
  std::vector<TaskTemplate> tasks;
};

Prepared prepare(const RunConfig& cfg) {
  Prepared p;
  p.lexicon = load_lexicon(cfg.lexicon);
  p.all_templates = load_templates(cfg);
  p.tasks = selected_tasks(cfg, p.all_templates);
  return p;
}

std::vector<LexicalEntry> target_nouns(const RunConfig& cfg, const Lexicon& lex, std::vector<std::string>* skipped) {
  const auto all = lex.of_class(WordClass::Noun);
  if (cfg.nouns.empty()) return {all.begin(), all.end()};
  std::vector<LexicalEntry> out;
  for (const auto& lemma : cfg.nouns) {
    const LexicalEntry* e = lex.find(lemma, WordClass::Noun);
    if (e) {
      out.push_back(*e);
    } else if (skipped) {
      skipped->push_back(lemma);
    }
  }
  return out;
}

json backend_info(const Backend& b) {
  json j{{"id", b.id()}, {"capabilities", b.capabilities().names()}};
  if (const auto* c = dynamic_cast<const ProtocolClient*>(&b)) j["peer_id"] = c->peer_id();
  return j;
}

struct ScoredBackend {
  ScoreMatrix matrix;
  std::vector<std::string> errors;
};

// Filters the lexicon for every backend, samples and scores. Writes the
// filtered lexicons as artifacts.
std::vector<ScoredBackend> score_backends(const RunConfig& cfg, const Prepared& p, RunDir& run, std::ostream& log) {
  if (cfg.backends.empty()) throw ConfigError("no backends configured");
  std::vector<ScoredBackend> out;
  ScoringOptions sopts;
  sopts.batch_size = cfg.batch_size;
  sopts.max_retries = cfg.max_retries;
  sopts.workers = cfg.workers;
  for (const auto& bc : cfg.backends) {
    auto backend = make_backend(bc, p.lexicon);
    run.manifest()["backends"].push_back(backend_info(*backend));
    const Lexicon filtered = filter_for_backend(p.lexicon, *backend);
    std::ostringstream lex_out;
    lex_out << provenance_line(cfg);
    write_lexicon(lex_out, filtered);
    run.write("lexicon_" + slug(bc.id) + ".tsv", lex_out.str());

    std::vector<std::string> skipped;
    const auto nouns = target_nouns(cfg, filtered, &skipped);
    if (!skipped.empty()) run.manifest()["skipped_nouns"][bc.id] = skipped;
    if (nouns.empty()) throw ConfigError("backend '" + bc.id + "': no target nouns survive filtering");

    SamplingOptions sampling;
    sampling.samples = cfg.samples_per_cell;
    sampling.seed = cfg.seed;
    const Workload w = sample_workload(filtered, p.tasks, nouns, sampling);
    log << "scoring " << bc.id << ": " << nouns.size() << " nouns x " << p.tasks.size() << " tasks\n";
    MatrixRun r = score_workload(w, *backend, sopts);
    out.push_back({std::move(r.matrix), std::move(r.errors)});
  }
  return out;
}

void write_scores(const RunConfig& cfg, const std::vector<ScoredBackend>& scored, RunDir& run) {
  std::vector<ScoreMatrix> ms;
  for (const auto& s : scored) ms.push_back(s.matrix);
  std::ostringstream out;
  out << provenance_line(cfg);
  write_scores_csv(out, ms);
  run.write("scores.csv", out.str());
  json errs = json::object();
  for (const auto& s : scored) {
    if (!s.errors.empty()) errs[s.matrix.backend_id()] = s.errors;
  }
  if (!errs.empty()) run.manifest()["cell_errors"] = errs;
}

std::size_t total_errors(const std::vector<ScoredBackend>& scored) {
  std::size_t n = 0;
  for (const auto& s : scored) n += s.errors.size();
  return n;
}

std::vector<ScoredBackend> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scores '" + path + "'");
  std::vector<ScoredBackend> out;
  for (auto& m : read_scores_csv(in)) out.push_back({std::move(m), {}});
  return out;
}

// ---------------------------------------------------------------- commands

void cmd_generate(const RunConfig& cfg, RunDir& run, std::ostream& log) {
  const Prepared p = prepare(cfg);
  SamplingOptions sampling;
  sampling.samples = cfg.samples_per_cell;
  sampling.seed = cfg.seed;
  const auto emit = [&](const std::string& name, const Lexicon& lex) {
    const auto nouns = target_nouns(cfg, lex, nullptr);
    if (nouns.empty()) throw ConfigError("no target nouns selected");
    const Workload w = sample_workload(lex, p.tasks, nouns, sampling);
    std::ostringstream out;
    out << provenance_line(cfg);
    write_workload(out, w);
    run.write(name, out.str());
    log << name << ": " << w.cells.size() << " cells\n";
  };
  if (cfg.backends.empty()) {
    emit("workload.tsv", p.lexicon);
    return;
  }
  for (const auto& bc : cfg.backends) {
    auto backend = make_backend(bc, p.lexicon);
    emit("workload_" + slug(bc.id) + ".tsv", filter_for_backend(p.lexicon, *backend));
  }
}

void cmd_analyze(const RunConfig& cfg, const std::vector<ScoredBackend>& scored, RunDir& run) {
  std::vector<ScoreMatrix> ms;
  for (const auto& s : scored) ms.push_back(s.matrix);

  std::vector<CorrelationResult> tasks_corr;
  for (const auto& m : ms) {
    auto r = task_correlations(m, TargetSplit::All, cfg.alpha);
    tasks_corr.insert(tasks_corr.end(), r.begin(), r.end());
  }
  std::ostringstream tc;
  tc << provenance_line(cfg);
  write_correlations_csv(tc, tasks_corr);
  run.write("correlations_tasks.csv", tc.str());

  if (ms.size() >= 2) {
    const auto cross = cross_model_correlations(ms, TargetSplit::All, cfg.alpha);
    std::ostringstream cc;
    cc << provenance_line(cfg);
    write_correlations_csv(cc, cross);
    run.write("correlations_models.csv", cc.str());
    std::size_t raw = 0, bonf = 0;
    for (const auto& c : cross) {
      raw += c.significant_raw && c.r > 0;
      bonf += c.significant_bonferroni && c.r > 0;
    }
    run.manifest()["cross_model_summary"] = {
        {"comparisons", cross.size()}, {"significant_positive_raw", raw}, {"significant_positive_bonferroni", bonf}};

    for (const auto& t : ms.front().tasks()) {
      std::vector<std::string> names;
      std::vector<std::string> nouns;
      std::set<std::string> seen;
      for (const auto& m : ms) {
        names.push_back(m.backend_id());
        for (const auto& n : m.nouns()) {
          if (seen.insert(n).second) nouns.push_back(n);
        }
      }
      std::vector<std::vector<std::optional<double>>> rows;
      for (const auto& n : nouns) {
        std::vector<std::optional<double>> row;
        for (const auto& m : ms) {
          const auto ni = m.noun_index(n);
          const auto ti = m.task_index(t);
          std::optional<double> v;
          if (ni && ti && m.at(*ni, *ti)) v = m.at(*ni, *ti)->mean;
          row.push_back(v);
        }
        rows.push_back(std::move(row));
      }
      std::ostringstream svg;
      write_pairplot_svg(svg, t + ": noun scores across models", names, rows);
      run.write("pairplot_models_" + slug(t) + ".svg", svg_comment(cfg) + svg.str());
    }
  }

  json pca_summary = json::object();
  for (const auto& m : ms) {
    std::ostringstream svg;
    write_pairplot_svg(svg, m.backend_id() + ": noun scores across tasks", m.tasks(), m.means());
    run.write("pairplot_tasks_" + slug(m.backend_id()) + ".svg", svg_comment(cfg) + svg.str());

    const PcaResult r = pca(m, cfg.standardize_pca);
    std::ostringstream var, load;
    var << provenance_line(cfg);
    write_pca_variance_csv(var, r);
    load << provenance_line(cfg);
    write_pca_loadings_csv(load, r);
    run.write("pca_variance_" + slug(m.backend_id()) + ".csv", var.str());
    run.write("pca_loadings_" + slug(m.backend_id()) + ".csv", load.str());
    pca_summary[m.backend_id()] = {{"rows_used", r.rows_used},
                                   {"rows_dropped", r.rows_dropped},
                                   {"pc1_explained", r.cumulative_explained.front()},
                                   {"standardized", r.standardized}};
  }
  run.manifest()["pca_summary"] = pca_summary;
}

void cmd_freq(const RunConfig& cfg, const std::vector<ScoredBackend>& scored, RunDir& run, std::ostream& log) {
  if (cfg.corpora.empty()) throw ConfigError("no corpora configured for frequency analysis");
  const Lexicon lex = load_lexicon(cfg.lexicon);
  const auto nouns = lex.of_class(WordClass::Noun);
  const auto forms = noun_forms(nouns);
  for (const auto& c : cfg.corpora) {
    const FrequencyTable table = count_frequencies_path(c.path, forms, c.id, cfg.workers);
    log << "counted " << c.id << ": " << table.total_tokens << " tokens\n";
    std::ostringstream ft;
    ft << provenance_line(cfg);
    write_frequency_csv(ft, table);
    run.write("frequency_" + slug(c.id) + ".csv", ft.str());

    for (const auto& s : scored) {
      const ScoreMatrix& m = s.matrix;
      const auto results = regress_frequency(m, table, nouns);
      const std::string stem = slug(c.id) + "_" + slug(m.backend_id());
      std::ostringstream rc;
      rc << provenance_line(cfg);
      write_regression_csv(rc, results);
      run.write("regression_" + stem + ".csv", rc.str());

      std::ostringstream ex;
      ex << provenance_line(cfg) << "task_id,number,excluded\n";
      std::vector<ScatterPanel> panels;
      for (const auto& r : results) {
        ex << r.task_id << ',' << number_name(r.number) << ',' << r.excluded << '\n';
        ScatterPanel panel;
        panel.title = r.task_id + " (" + std::string(number_name(r.number)) + ")  R2=" + format_double(r.r_squared);
        panel.x_label = "log10 frequency";
        panel.y_label = "z-scored performance";
        const TargetSplit split = r.number == Number::Singular ? TargetSplit::Singular : TargetSplit::Plural;
        const auto t = *m.task_index(r.task_id);
        std::vector<double> perf;
        for (const auto& noun : nouns) {
          const auto ni = m.noun_index(noun.lemma);
          if (!ni || !m.at(*ni, t, split)) continue;
          const auto f = table.count(noun.form(r.number));
          if (f == 0) continue;
          panel.x.push_back(std::log10(static_cast<double>(f)));
          perf.push_back(m.at(*ni, t, split)->mean);
        }
        double mean = 0, ss = 0;
        for (double v : perf) mean += v;
        mean /= static_cast<double>(perf.size());
        for (double v : perf) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(perf.size() - 1));
        for (double v : perf) panel.y.push_back(sd > 0 ? (v - mean) / sd : 0.0);
        panel.fit = std::make_pair(r.slope, r.intercept);
        panels.push_back(std::move(panel));
      }
      run.write("regression_excluded_" + stem + ".csv", ex.str());
      std::ostringstream svg;
      write_scatter_svg(svg, m.backend_id() + " on " + c.id + ": performance vs frequency", panels, 4);
      run.write("frequency_scatter_" + stem + ".svg", svg_comment(cfg) + svg.str());
    }
  }
}

std::vector<FineTuneSpec> fewshot_specs(const RunConfig& cfg, const std::vector<TaskTemplate>& templates,
                                        const std::string& data_type, const std::string& token) {
  const NovelTokens& tokens = cfg.fewshot.tokens;
  const auto make = [&](const std::string& dt, const std::string& tok) {
    const auto num = tokens.number_of(tok);
    if (!num) throw ConfigError("'" + tok + "' is not a novel token (" + tokens.singular + "/" + tokens.plural + ")");
    const TaskTemplate* t = find_template(templates, dt);
    if (!t || t->role != TemplateRole::FineTune) throw ConfigError("unknown fine-tuning data type '" + dt + "'");
    FineTuneSpec s;
    s.data_type = t->task_id;
    s.number = *num;
    s.n_sentences = cfg.fewshot.n_sentences;
    return s;
  };
  std::vector<FineTuneSpec> out;
  if (!data_type.empty()) {
    if (!token.empty()) {
      out.push_back(make(data_type, token));
    } else {
      const TaskTemplate* t = find_template(templates, data_type);
      if (!t) throw ConfigError("unknown fine-tuning data type '" + data_type + "'");
      if (t->number != NumberConstraint::PluralOnly) out.push_back(make(data_type, tokens.singular));
      if (t->number != NumberConstraint::SingularOnly) out.push_back(make(data_type, tokens.plural));
    }
    return out;
  }
  if (!cfg.fewshot.specs.empty()) {
    for (const auto& s : cfg.fewshot.specs) {
      const auto dash = s.rfind('-');
      if (dash == std::string::npos) throw ConfigError("few-shot spec '" + s + "' should look like data_type-token");
      out.push_back(make(s.substr(0, dash), s.substr(dash + 1)));
    }
    return out;
  }
  for (const auto& t : templates) {
    if (t.role != TemplateRole::FineTune) continue;
    if (t.number != NumberConstraint::PluralOnly) out.push_back(make(t.task_id, tokens.singular));
    if (t.number != NumberConstraint::SingularOnly) out.push_back(make(t.task_id, tokens.plural));
  }
  return out;
}

bool cmd_fewshot(const RunConfig& cfg, const std::string& data_type, const std::string& token,
                 std::optional<int> epochs, RunDir& run, std::ostream& log) {
  const Prepared p = prepare(cfg);
  auto specs = fewshot_specs(cfg, p.all_templates, data_type, token);
  if (cfg.backends.empty()) throw ConfigError("no backends configured");
  FewShotOptions opts;
  opts.samples = cfg.fewshot.samples.value_or(cfg.samples_per_cell);
  opts.seed = cfg.seed;
  opts.tokens = cfg.fewshot.tokens;
  opts.scoring.batch_size = cfg.batch_size;
  opts.scoring.max_retries = cfg.max_retries;
  opts.scoring.workers = cfg.workers;

  bool complete = true;
  for (const auto& bc : cfg.backends) {
    auto backend = make_backend(bc, p.lexicon);
    run.manifest()["backends"].push_back(backend_info(*backend));
    const Lexicon filtered = filter_for_backend(p.lexicon, *backend);
    std::vector<FewShotResult> results;
    for (auto spec : specs) {
      spec.epochs = epochs.value_or(bc.fewshot_epochs());
      log << "few-shot " << bc.id << ": " << spec.label(opts.tokens) << ", " << spec.epochs << " epoch(s)\n";
      results.push_back(run_fewshot(spec, *backend, filtered, opts, p.all_templates));
      if (!results.back().complete) {
        complete = false;
        run.manifest()["fewshot_errors"].push_back({{"backend", bc.id},
                                                    {"spec", spec.label(opts.tokens)},
                                                    {"error", results.back().error}});
        break;
      }
    }
    std::ostringstream csv;
    csv << provenance_line(cfg);
    write_fewshot_csv(csv, results);
    run.write("fewshot_" + slug(bc.id) + ".csv", csv.str());

    json sentences = json::object();
    for (const auto& r : results) sentences[r.spec.data_type + "-" + r.novel_token] = r.sentences;
    run.manifest()["fewshot_training_sentences"][bc.id] = sentences;

    if (!results.empty()) {
      const auto& tasks = results.front().tasks;
      std::vector<std::string> cols;
      std::vector<std::vector<std::optional<double>>> values(tasks.size());
      std::set<std::string> baseline_done;
      for (const auto& r : results) {
        if (baseline_done.insert(r.novel_token).second) {
          cols.push_back("baseline (" + r.novel_token + ")");
          for (std::size_t t = 0; t < tasks.size(); ++t) {
            values[t].push_back(t < r.baseline.size() && r.baseline[t] ? std::optional(r.baseline[t]->mean)
                                                                        : std::nullopt);
          }
        }
      }
      for (const auto& r : results) {
        cols.push_back(r.spec.data_type + " (" + r.novel_token + ")");
        for (std::size_t t = 0; t < tasks.size(); ++t) {
          values[t].push_back(t < r.post.size() && r.post[t] ? std::optional(r.post[t]->mean) : std::nullopt);
        }
      }
      std::ostringstream svg;
      write_heat_grid_svg(svg, bc.id + ": few-shot scores", tasks, cols, values);
      run.write("fewshot_grid_" + slug(bc.id) + ".svg", svg_comment(cfg) + svg.str());
    }
    if (!complete) break;
  }
  return complete;
}

std::string markdown_table(const std::string& csv, std::size_t max_rows) {
  std::istringstream in(csv);
  std::string line;
  std::ostringstream out;
  std::size_t rows = 0;
  bool header = true;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto cols = split(line, ',');
    if (header) {
      width = cols.size();
      out << '|';
      for (const auto& c : cols) out << ' ' << c << " |";
      out << "\n|";
      for (std::size_t i = 0; i < width; ++i) out << "---|";
      out << '\n';
      header = false;
      continue;
    }
    if (rows++ < max_rows) {
      out << '|';
      for (const auto& c : cols) out << ' ' << c << " |";
      out << '\n';
    }
  }
  if (rows > max_rows) out << "\n(" << rows - max_rows << " more rows in the CSV)\n";
  return out.str();
}

void cmd_report(const std::vector<std::string>& from, RunDir& run) {
  std::ostringstream md;
  md << "# nounprobe report\n\n";
  for (const auto& d : from) {
    const fs::path dir(d);
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw ConfigError("'" + d + "' has no manifest.json");
    json m;
    try {
      m = json::parse(mf);
    } catch (const json::exception& e) {
      throw ConfigError("'" + d + "/manifest.json' is not valid JSON");
    }
    md << "## Run `" << m.value("run_id", dir.filename().string()) << "` (" << m.value("command", std::string("?"))
       << ")\n\n"
       << "- status: " << m.value("status", std::string("?")) << "\n"
       << "- started: " << m.value("started_at", std::string("?")) << "\n"
       << "- config hash: " << m.value("config_hash", std::string("?")) << "\n"
       << "- seed: " << m.value("seed", json(nullptr)).dump() << ", samples per cell: "
       << m.value("samples_per_cell", json(nullptr)).dump() << "\n"
       << "- backends: " << m.value("backend_ids", json::array()).dump() << "\n";
    if (m.contains("cross_model_summary")) md << "- cross-model correlations: " << m["cross_model_summary"].dump() << "\n";
    if (m.contains("pca_summary")) md << "- PCA: " << m["pca_summary"].dump() << "\n";
    if (m.contains("error")) md << "- error: " << m["error"].dump() << "\n";
    md << '\n';
    for (const auto& a : m.value("artifact_list", json::array())) {
      const std::string name = a.get<std::string>();
      const fs::path path = dir / name;
      if (path.extension() == ".svg") {
        md << "### " << name << "\n\n![" << name << "](" << fs::absolute(path).string() << ")\n\n";
        continue;
      }
      if (path.extension() != ".csv") continue;
      std::ifstream in(path);
      std::stringstream buf;
      buf << in.rdbuf();
      md << "### " << name << "\n\n";
      if (name == "scores.csv") {
        // noun means averaged per backend and task
        std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> agg;
        std::map<std::pair<std::string, std::string>, std::size_t> positive;
        for (auto& ms : read_scores_csv(buf)) {
          for (std::size_t t = 0; t < ms.tasks().size(); ++t) {
            for (std::size_t n = 0; n < ms.nouns().size(); ++n) {
              if (const auto& s = ms.at(n, t)) {
                auto& [sum, cnt] = agg[{ms.backend_id(), ms.tasks()[t]}];
                sum += s->mean;
                ++cnt;
                positive[{ms.backend_id(), ms.tasks()[t]}] += s->mean > 0;
              }
            }
          }
        }
        md << "| backend | task | nouns | mean noun score | nouns above 0 |\n|---|---|---|---|---|\n";
        for (const auto& [key, v] : agg) {
          md << "| " << key.first << " | " << key.second << " | " << v.second << " | "
             << format_double(v.first / static_cast<double>(v.second)) << " | " << positive[key] << " |\n";
        }
        md << '\n';
      } else {
        md << markdown_table(buf.str(), 40) << '\n';
      }
    }
  }
  run.write("report.md", md.str());
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const BackendError*>(&e)) return kExitBackend;
  if (dynamic_cast<const AnalysisError*>(&e)) return kExitAnalysis;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitConfig;
  return 1;
}

std::string kind_for(int code) {
  switch (code) {
    case kExitConfig: return "config";
    case kExitBackend: return "backend";
    case kExitAnalysis: return "analysis";
    default: return "internal";
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noun-level grammatical evaluation harness for language models", "nounprobe"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common gen_c, score_c, an_c, freq_c, fs_c;
  auto* gen = app.add_subcommand("generate", "export the sampled workload");
  add_common(gen, gen_c, true);
  auto* score = app.add_subcommand("score", "score every (noun, task) cell");
  add_common(score, score_c, true);
  auto* analyze = app.add_subcommand("analyze", "task and model correlations, PCA, pair plots");
  add_common(analyze, an_c, false);
  std::string an_scores;
  std::optional<double> an_alpha;
  bool an_raw = false;
  analyze->add_option("--scores", an_scores, "analyze an existing scores.csv instead of scoring")
      ->check(CLI::ExistingFile);
  analyze->add_option("--alpha", an_alpha, "significance level");
  analyze->add_flag("--raw-pca", an_raw, "PCA on the raw covariance instead of z-scored columns");
  auto* freq = app.add_subcommand("freq", "corpus frequencies and frequency regressions");
  add_common(freq, freq_c, true);
  std::string freq_scores;
  freq->add_option("--scores", freq_scores, "use an existing scores.csv")->check(CLI::ExistingFile);
  auto* fewshot = app.add_subcommand("fewshot", "novel-token fine-tuning experiments");
  add_common(fewshot, fs_c, true);
  std::string fs_spec, fs_token;
  std::optional<int> fs_epochs;
  fewshot->add_option("--spec", fs_spec, "fine-tuning data type, e.g. simple or unison");
  fewshot->add_option("--token", fs_token, "novel token, e.g. wug");
  fewshot->add_option("--epochs", fs_epochs, "fine-tuning epochs (backend default otherwise)");
  auto* report = app.add_subcommand("report", "summarize earlier runs into one document");
  std::vector<std::string> rep_from;
  std::string rep_out, rep_id;
  report->add_option("--from", rep_from, "run directories to summarize")->required()->check(CLI::ExistingDirectory);
  report->add_option("-o,--output-dir", rep_out, "directory receiving the report run (parent of the first run by default)");
  report->add_option("--run-id", rep_id, "name of the report run directory");
  auto* synth = app.add_subcommand("synth-corpus", "write a number-agreement training corpus built from a lexicon");
  std::string syn_lex, syn_out;
  std::vector<std::string> syn_controls;
  std::size_t syn_repeats = 1;
  std::uint64_t syn_seed = 1;
  synth->add_option("--lexicon", syn_lex, "lexicon TSV")->required()->check(CLI::ExistingFile);
  synth->add_option("--controls", syn_controls, "nouns trained with reversed agreement")->delimiter(',');
  synth->add_option("--repeats", syn_repeats, "copies of each sentence");
  synth->add_option("--seed", syn_seed, "shuffle seed");
  synth->add_option("--out", syn_out, "output file")->required();

  const auto fail = [&](int code, const std::string& message) {
    err << json{{"error", {{"code", code}, {"kind", kind_for(code)}, {"message", message}}}}.dump() << '\n';
    return code;
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return fail(kExitConfig, e.what());
  }

  std::optional<RunDir> run;
  try {
    if (synth->parsed()) {
      const Lexicon lex = load_lexicon(syn_lex);
      const auto corpus = agreement_corpus(lex, syn_controls, syn_repeats, syn_seed);
      std::ofstream f(syn_out);
      if (!f) throw ConfigError("cannot write '" + syn_out + "'");
      for (const auto& s : corpus) f << s << '\n';
      out << "wrote " << corpus.size() << " sentences to " << syn_out << '\n';
      return kExitOk;
    }
    if (report->parsed()) {
      const fs::path outdir = rep_out.empty() ? fs::path(rep_from.front()).parent_path() : fs::path(rep_out);
      json m;
      m["sources"] = rep_from;
      m["argv"] = args;
      m["config_hash"] = nullptr;
      m["seed"] = nullptr;
      m["backend_ids"] = json::array();
      run.emplace(outdir, "report", rep_id, m);
      cmd_report(rep_from, *run);
      run->finish("complete");
      out << run->dir().string() << '\n';
      return kExitOk;
    }

    CLI::App* sub = app.get_subcommands().front();
    Common& c = sub == gen ? gen_c : sub == score ? score_c : sub == analyze ? an_c : sub == freq ? freq_c : fs_c;
    RunConfig cfg = resolve_config(c);
    if (sub == analyze) {
      if (an_alpha) cfg.alpha = *an_alpha;
      if (an_raw) cfg.standardize_pca = false;
    }
    const bool needs_scores = (sub == analyze && an_scores.empty()) || (sub == freq && freq_scores.empty());
    if (sub != analyze || an_scores.empty()) cfg.validate();
    run.emplace(cfg.output_dir, sub->get_name(), c.run_id, base_manifest(cfg, args));
    bool complete = true;

    if (sub == gen) {
      cmd_generate(cfg, *run, err);
    } else if (sub == score || needs_scores) {
      const Prepared p = prepare(cfg);
      const auto scored = score_backends(cfg, p, *run, err);
      write_scores(cfg, scored, *run);
      complete = total_errors(scored) == 0;
      if (complete && sub == analyze) cmd_analyze(cfg, scored, *run);
      if (complete && sub == freq) cmd_freq(cfg, scored, *run, err);
    } else if (sub == analyze) {
      cmd_analyze(cfg, load_scores(an_scores), *run);
    } else if (sub == freq) {
      cmd_freq(cfg, load_scores(freq_scores), *run, err);
    } else if (sub == fewshot) {
      complete = cmd_fewshot(cfg, fs_spec, fs_token, fs_epochs, *run, err);
    }

    if (!complete) {
      const json e{{"code", kExitBackend}, {"kind", "backend"}, {"message", "backend failures left the run incomplete"}};
      run->finish("partial", e);
      err << json{{"error", e}}.dump() << '\n';
      out << run->dir().string() << '\n';
      return kExitBackend;
    }
    run->finish("complete");
    out << run->dir().string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    if (run) {
      run->finish(run->manifest()["artifact_list"].empty() ? "failed" : "partial",
                  json{{"code", code}, {"kind", kind_for(code)}, {"message", e.what()}});
    }
    return fail(code, e.what());
  }
}

}  // namespace nounprobe
