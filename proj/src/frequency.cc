#include "nounprobe/frequency.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>
#include <unordered_map>

#include "nounprobe/error.hpp"
#include "nounprobe/text.hpp"

namespace nounprobe {

std::uint64_t FrequencyTable::count(std::string_view form) const {
  const auto it = counts.find(to_lower(form));
  return it == counts.end() ? 0 : it->second;
}

void FrequencyTable::merge(const FrequencyTable& other) {
  for (const auto& [form, c] : other.counts) counts[form] += c;
  total_tokens += other.total_tokens;
}

FrequencyTable count_frequencies(std::istream& corpus, std::span<const std::string> forms, std::string corpus_id) {
  if (forms.empty()) throw ConfigError("frequency count needs at least one word form");
  std::unordered_map<std::string, std::uint64_t> live;
  for (const auto& f : forms) live.emplace(to_lower(f), 0);

  FrequencyTable t;
  t.corpus_id = std::move(corpus_id);
  for_each_token(corpus, [&](const std::string& tok) {
    ++t.total_tokens;
    if (auto it = live.find(tok); it != live.end()) ++it->second;
  });
  if (corpus.bad()) throw ConfigError("error reading corpus " + t.corpus_id);
  t.counts.insert(live.begin(), live.end());
  return t;
}

FrequencyTable count_frequencies_path(const std::filesystem::path& path, std::span<const std::string> forms,
                                      std::string corpus_id, std::size_t workers) {
  namespace fs = std::filesystem;
  if (corpus_id.empty()) corpus_id = path.filename().string();
  std::error_code ec;
  std::vector<fs::path> files;
  if (fs::is_directory(path, ec)) {
    for (const auto& e : fs::recursive_directory_iterator(path, ec)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(path, ec)) {
    files.push_back(path);
  }
  if (files.empty()) throw ConfigError("corpus " + path.string() + " is not a readable file or non-empty directory");

  std::vector<FrequencyTable> shards(files.size());
  std::vector<std::string> failures(files.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      std::ifstream in(files[i], std::ios::binary);
      if (!in) {
        failures[i] = "cannot open corpus file " + files[i].string();
        continue;
      }
      try {
        shards[i] = count_frequencies(in, forms, corpus_id);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t n = std::clamp<std::size_t>(workers, 1, files.size());
    for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
    work();
  }
  for (const auto& f : failures) {
    if (!f.empty()) throw ConfigError(f);
  }

  FrequencyTable total;
  total.corpus_id = corpus_id;
  for (const auto& f : forms) total.counts.emplace(to_lower(f), 0);
  for (const auto& s : shards) total.merge(s);
  return total;
}

std::vector<std::string> noun_forms(std::span<const LexicalEntry> nouns) {
  std::vector<std::string> out;
  for (const auto& n : nouns) {
    if (!n.singular.empty()) out.push_back(n.singular);
    if (!n.plural.empty()) out.push_back(n.plural);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

RegressionResult regress_log_frequency(std::string task_id, Number number, std::span<const double> performance,
                                       std::span<const std::uint64_t> frequency) {
  if (performance.size() != frequency.size()) throw AnalysisError("regression: performance/frequency length mismatch");
  RegressionResult res;
  res.task_id = std::move(task_id);
  res.number = number;

  std::vector<double> x, y;
  for (std::size_t i = 0; i < performance.size(); ++i) {
    if (frequency[i] == 0) {
      ++res.excluded;
      continue;
    }
    x.push_back(std::log10(static_cast<double>(frequency[i])));
    y.push_back(performance[i]);
  }
  res.n = x.size();
  const std::string where = res.task_id + " (" + std::string(number_name(number)) + ")";
  if (res.n < 3) {
    throw AnalysisError("regression for " + where + ": need at least 3 nouns with nonzero frequency, have " +
                        std::to_string(res.n));
  }

  const double n = static_cast<double>(res.n);
  double my = 0;
  for (double v : y) my += v;
  my /= n;
  double syy = 0;
  for (double v : y) syy += (v - my) * (v - my);
  const double sd = std::sqrt(syy / (n - 1));
  for (double& v : y) v = sd > 0 ? (v - my) / sd : 0.0;

  double mx = 0;
  for (double v : x) mx += v;
  mx /= n;
  double sxx = 0, sxy = 0, szz = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * y[i];
    szz += y[i] * y[i];
  }
  if (sxx == 0.0) throw AnalysisError("regression for " + where + ": every noun has the same frequency");
  res.slope = sxy / sxx;
  res.intercept = -res.slope * mx;  // z-scored y has mean 0
  res.r_squared = szz > 0 ? std::clamp(sxy * sxy / (sxx * szz), 0.0, 1.0) : 0.0;
  return res;
}

std::vector<RegressionResult> regress_frequency(const ScoreMatrix& scores, const FrequencyTable& freqs,
                                                std::span<const LexicalEntry> nouns) {
  std::vector<RegressionResult> out;
  for (std::size_t t = 0; t < scores.tasks().size(); ++t) {
    for (Number num : {Number::Singular, Number::Plural}) {
      const TargetSplit split = num == Number::Singular ? TargetSplit::Singular : TargetSplit::Plural;
      std::vector<double> perf;
      std::vector<std::uint64_t> freq;
      for (const auto& noun : nouns) {
        const auto ni = scores.noun_index(noun.lemma);
        if (!ni) continue;
        const auto& cell = scores.at(*ni, t, split);
        if (!cell) continue;
        perf.push_back(cell->mean);
        freq.push_back(freqs.count(noun.form(num)));
      }
      out.push_back(regress_log_frequency(scores.tasks()[t], num, perf, freq));
    }
  }
  return out;
}

void write_frequency_csv(std::ostream& out, const FrequencyTable& t) {
  out << "# total_tokens=" << t.total_tokens << '\n';
  out << "corpus_id,form,count\n";
  for (const auto& [form, c] : t.counts) out << t.corpus_id << ',' << form << ',' << c << '\n';
}

void write_regression_csv(std::ostream& out, std::span<const RegressionResult> results) {
  out << "task_id,number,slope,intercept,r_squared,n\n";
  for (const auto& r : results) {
    out << r.task_id << ',' << number_name(r.number) << ',' << format_double(r.slope) << ','
        << format_double(r.intercept) << ',' << format_double(r.r_squared) << ',' << r.n << '\n';
  }
}

}  // namespace nounprobe
