#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "dyfulm/config.hpp"
#include "dyfulm/csv.hpp"
#include "dyfulm/rng.hpp"

namespace dyfulm {

// ---------------------------------------------------------------------------
// text normalization

// Lowercases, drops URL and @mention tokens, strips '#' markers, then keeps
// only [a-z0-9 '] with single spaces. Running it twice changes nothing.
inline std::string clean_text(const std::string& raw) {
  std::string lower;
  lower.reserve(raw.size());
  for (char ch : raw) lower += (ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : ch;

  std::string out;
  size_t i = 0;
  const size_t n = lower.size();
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < n) {
    while (i < n && is_space(lower[i])) ++i;
    size_t j = i;
    while (j < n && !is_space(lower[j])) ++j;
    if (j == i) break;
    const std::string token = lower.substr(i, j - i);
    i = j;
    if (token.rfind("http://", 0) == 0 || token.rfind("https://", 0) == 0 ||
        token.rfind("www.", 0) == 0 || token[0] == '@')
      continue;
    for (char ch : token) {
      if (ch == '#') continue;
      const bool keep = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '\'';
      out += keep ? ch : ' ';
    }
    out += ' ';
  }
  // collapse runs of spaces and trim
  std::string collapsed;
  collapsed.reserve(out.size());
  for (char ch : out) {
    if (ch == ' ' && (collapsed.empty() || collapsed.back() == ' ')) continue;
    collapsed += ch;
  }
  while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  return collapsed;
}

// ---------------------------------------------------------------------------
// labels from the 0..10 review score

struct Labels {
  int coarse = 0;   // 0 negative, 1 neutral, 2 positive
  int fine = 0;     // 0..4, very negative .. very positive
  double intensity = 0.0;  // score / 10
};

inline Labels build_labels(double score) {
  if (!(score >= 0.0 && score <= 10.0))
    throw std::out_of_range("build_labels: score " + std::to_string(score) + " outside [0,10]");
  Labels l;
  l.fine = score < 3.0 ? 0 : score < 5.0 ? 1 : score < 7.0 ? 2 : score < 9.0 ? 3 : 4;
  l.coarse = score < 5.0 ? 0 : score < 7.0 ? 1 : 2;
  l.intensity = score / 10.0;
  return l;
}

// ---------------------------------------------------------------------------
// vocabulary

struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> words;  // words[i] owns id i+2
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(words.size()) + 2; }

  int id_of(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? kUnk : it->second;
  }

  void rebuild_index() {
    index.clear();
    for (size_t i = 0; i < words.size(); ++i) index[words[i]] = static_cast<int>(i) + 2;
  }
};

// ranked by count (desc) then word (asc); ties are therefore stable
inline Vocabulary build_vocab(const std::vector<std::string>& texts, int min_frequency = 1,
                              int max_size = 20000) {
  if (min_frequency < 1) throw std::invalid_argument("build_vocab: min_frequency must be >= 1");
  if (max_size < 2) throw std::invalid_argument("build_vocab: max_size must admit pad and unk");
  std::map<std::string, long> counts;
  for (const std::string& text : texts) {
    std::istringstream ss(text);
    std::string w;
    while (ss >> w) ++counts[w];
  }
  if (counts.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::vector<std::pair<std::string, long>> ranked;
  for (auto& [w, c] : counts)
    if (c >= min_frequency) ranked.emplace_back(w, c);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  const size_t cap = static_cast<size_t>(max_size - 2);
  for (const auto& [w, c] : ranked) {
    if (v.words.size() == cap) break;
    v.words.push_back(w);
  }
  v.rebuild_index();
  return v;
}

// exactly t_max ids: truncated if long, padded with kPad if short
inline std::vector<int> tokenize(const Vocabulary& v, const std::string& clean, int t_max) {
  if (t_max < 1) throw std::invalid_argument("tokenize: t_max must be positive");
  std::vector<int> ids;
  ids.reserve(static_cast<size_t>(t_max));
  std::istringstream ss(clean);
  std::string w;
  while (static_cast<int>(ids.size()) < t_max && ss >> w) ids.push_back(v.id_of(w));
  while (static_cast<int>(ids.size()) < t_max) ids.push_back(Vocabulary::kPad);
  return ids;
}

// ---------------------------------------------------------------------------
// records

struct Record {
  std::string raw_text;
  std::string clean;
  std::vector<int> ids;
  double score = 0.0;
  int coarse = 0;
  int fine = 0;
  double intensity = 0.0;
  std::optional<int> year;
};

struct RawRow {
  std::string text;
  std::optional<double> score;
  std::optional<int> year;
};

// ---------------------------------------------------------------------------
// dataset statistics

// linear-interpolation quantile on the sorted sample (the spreadsheet rule):
// rank h = (n−1)p, value = x[⌊h⌋] + (h−⌊h⌋)·(x[⌊h⌋+1] − x[⌊h⌋])
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0,1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return v[lo];
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

struct GroupStats {
  std::string group;  // "overall" or a year
  double max = 0.0, q25 = 0.0, mean = 0.0, median = 0.0;
};

struct DatasetStats {
  std::vector<GroupStats> groups;       // overall first, then years ascending
  std::vector<long> coarse_counts;      // size 3
  std::vector<long> fine_counts;        // size 5
};

inline GroupStats stats_over(const std::string& name, const std::vector<double>& scores) {
  GroupStats g;
  g.group = name;
  g.max = *std::max_element(scores.begin(), scores.end());
  g.q25 = quantile(scores, 0.25);
  double total = 0.0;
  for (double s : scores) total += s;
  g.mean = total / static_cast<double>(scores.size());
  g.median = quantile(scores, 0.5);
  return g;
}

inline DatasetStats dataset_stats(const std::vector<Record>& records) {
  if (records.empty()) throw std::invalid_argument("dataset_stats: no records");
  DatasetStats out;
  out.coarse_counts.assign(3, 0);
  out.fine_counts.assign(5, 0);
  std::vector<double> overall;
  std::map<int, std::vector<double>> by_year;
  for (const Record& r : records) {
    overall.push_back(r.score);
    if (r.year) by_year[*r.year].push_back(r.score);
    ++out.coarse_counts[static_cast<size_t>(r.coarse)];
    ++out.fine_counts[static_cast<size_t>(r.fine)];
  }
  out.groups.push_back(stats_over("overall", overall));
  for (const auto& [year, scores] : by_year)
    out.groups.push_back(stats_over(std::to_string(year), scores));
  return out;
}

// ---------------------------------------------------------------------------
// integrity checking

struct IntegrityReport {
  long records = 0;
  long empty_text = 0;        // clean text empty or all padding
  long not_normalized = 0;    // clean text changes under clean_text
  long score_out_of_range = 0;
  long label_mismatch = 0;    // stored labels disagree with the score
  long bad_ids = 0;           // wrong length or id outside the vocabulary

  long violations() const {
    return empty_text + not_normalized + score_out_of_range + label_mismatch + bad_ids;
  }
};

inline IntegrityReport integrity_check(const std::vector<Record>& records, const Vocabulary& vocab,
                                       int t_max) {
  IntegrityReport rep;
  rep.records = static_cast<long>(records.size());
  for (const Record& r : records) {
    if (r.clean.empty() || (!r.ids.empty() && r.ids[0] == Vocabulary::kPad)) ++rep.empty_text;
    if (clean_text(r.clean) != r.clean) ++rep.not_normalized;
    if (!(r.score >= 0.0 && r.score <= 10.0)) {
      ++rep.score_out_of_range;
    } else {
      const Labels l = build_labels(r.score);
      if (l.coarse != r.coarse || l.fine != r.fine || l.intensity != r.intensity) ++rep.label_mismatch;
    }
    bool ids_ok = static_cast<int>(r.ids.size()) == t_max;
    if (ids_ok)
      for (int id : r.ids) ids_ok = ids_ok && id >= 0 && id < vocab.size();
    if (!ids_ok) ++rep.bad_ids;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// full pipeline: raw rows → records + vocabulary

struct PipelineResult {
  std::vector<Record> records;
  Vocabulary vocab;
  long dropped_empty = 0;    // no usable text after cleaning
  long dropped_no_score = 0;
  long dropped_bad_score = 0;
};

inline PipelineResult run_pipeline(const std::vector<RawRow>& rows, const DataConfig& cfg, int t_max) {
  PipelineResult out;
  std::vector<std::pair<const RawRow*, std::string>> kept;
  kept.reserve(rows.size());
  for (const RawRow& row : rows) {
    if (!row.score) {
      ++out.dropped_no_score;
      continue;
    }
    if (!(*row.score >= 0.0 && *row.score <= 10.0)) {
      ++out.dropped_bad_score;
      continue;
    }
    std::string clean = clean_text(row.text);
    if (clean.empty()) {
      ++out.dropped_empty;
      continue;
    }
    kept.emplace_back(&row, std::move(clean));
  }
  if (kept.empty())
    throw std::runtime_error("pipeline: no usable rows (dropped " +
                             std::to_string(out.dropped_empty + out.dropped_no_score + out.dropped_bad_score) +
                             ")");
  std::vector<std::string> texts;
  texts.reserve(kept.size());
  for (const auto& [row, clean] : kept) texts.push_back(clean);
  out.vocab = build_vocab(texts, cfg.min_frequency, cfg.max_vocab);
  out.records.reserve(kept.size());
  for (auto& [row, clean] : kept) {
    Record r;
    r.raw_text = row->text;
    r.clean = std::move(clean);
    r.ids = tokenize(out.vocab, r.clean, t_max);
    r.score = *row->score;
    const Labels l = build_labels(r.score);
    r.coarse = l.coarse;
    r.fine = l.fine;
    r.intensity = l.intensity;
    r.year = row->year;
    out.records.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// csv adapters

namespace detail {

inline int find_column(const std::vector<std::string>& header, const std::string& name,
                       const std::string& what) {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  std::string have;
  for (const std::string& h : header) have += (have.empty() ? "" : ", ") + h;
  throw std::runtime_error(what + ": missing column '" + name + "' (have: " + have + ")");
}

inline std::optional<double> parse_score(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

// columns: text, score, optional year
inline std::vector<RawRow> load_generic_csv(std::istream& in) {
  const auto rows = parse_csv(in);
  if (rows.empty()) throw std::runtime_error("generic csv: empty file");
  const int text_col = detail::find_column(rows[0], "text", "generic csv");
  const int score_col = detail::find_column(rows[0], "score", "generic csv");
  int year_col = -1;
  for (size_t i = 0; i < rows[0].size(); ++i)
    if (rows[0][i] == "year") year_col = static_cast<int>(i);
  std::vector<RawRow> out;
  out.reserve(rows.size() - 1);
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    RawRow r;
    if (text_col < static_cast<int>(row.size())) r.text = row[static_cast<size_t>(text_col)];
    if (score_col < static_cast<int>(row.size()))
      r.score = detail::parse_score(row[static_cast<size_t>(score_col)]);
    if (year_col >= 0 && year_col < static_cast<int>(row.size())) {
      const std::string& y = row[static_cast<size_t>(year_col)];
      if (!y.empty() && y.find_first_not_of("0123456789") == std::string::npos)
        r.year = std::stoi(y);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// hotel review export: positive and negative comments concatenated, score as
// given, year taken from the trailing /YYYY of the review date
inline std::vector<RawRow> load_booking_csv(std::istream& in) {
  const auto rows = parse_csv(in);
  if (rows.empty()) throw std::runtime_error("booking csv: empty file");
  const int pos_col = detail::find_column(rows[0], "Positive_Review", "booking csv");
  const int neg_col = detail::find_column(rows[0], "Negative_Review", "booking csv");
  const int score_col = detail::find_column(rows[0], "Reviewer_Score", "booking csv");
  const int date_col = detail::find_column(rows[0], "Review_Date", "booking csv");
  std::vector<RawRow> out;
  out.reserve(rows.size() - 1);
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    auto cell = [&](int col) -> std::string {
      return col < static_cast<int>(row.size()) ? row[static_cast<size_t>(col)] : std::string();
    };
    RawRow r;
    r.text = cell(pos_col);
    const std::string neg = cell(neg_col);
    if (!r.text.empty() && !neg.empty()) r.text += ' ';
    r.text += neg;
    r.score = detail::parse_score(cell(score_col));
    const std::string date = cell(date_col);
    const size_t slash = date.rfind('/');
    if (slash != std::string::npos) {
      const std::string y = date.substr(slash + 1);
      if (y.size() == 4 && y.find_first_not_of("0123456789") == std::string::npos)
        r.year = std::stoi(y);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic corpus

// Balanced by construction: row i draws its fine class as i mod 5, words come
// from that class's own pool plus shared filler, and the score is uniform in
// the class band, so labels recovered downstream match exactly.
inline std::vector<RawRow> generate_synthetic(int n, int vocab_size, std::uint64_t seed,
                                              int max_words = 12) {
  if (n < 1) throw std::invalid_argument("generate_synthetic: need at least one row");
  if (vocab_size < 8) throw std::invalid_argument("generate_synthetic: vocab_size must be at least 8");
  if (max_words < 4) throw std::invalid_argument("generate_synthetic: max_words must be at least 4");

  static const std::vector<std::vector<std::string>> base_pools = {
      {"awful", "terrible", "horrible", "worst", "filthy", "disgusting", "rude", "broken"},
      {"bad", "poor", "noisy", "cramped", "stained", "overpriced", "slow", "cold"},
      {"okay", "average", "plain", "adequate", "standard", "typical", "fine", "usual"},
      {"good", "nice", "clean", "comfy", "friendly", "pleasant", "helpful", "tasty"},
      {"great", "excellent", "amazing", "perfect", "wonderful", "superb", "lovely", "fantastic"}};
  static const std::vector<std::string> base_filler = {"the", "room",   "hotel", "staff",
                                                       "was", "really", "very",  "stay"};

  const int words_needed = vocab_size - 2;  // pad and unk take two slots
  const int per_class = std::min(8, std::max(1, words_needed / 6));
  std::vector<std::vector<std::string>> pools(5);
  for (int c = 0; c < 5; ++c)
    pools[static_cast<size_t>(c)].assign(base_pools[static_cast<size_t>(c)].begin(),
                                         base_pools[static_cast<size_t>(c)].begin() + per_class);
  std::vector<std::string> filler;
  for (int i = 0; i < words_needed - 5 * per_class; ++i)
    filler.push_back(i < static_cast<int>(base_filler.size()) ? base_filler[static_cast<size_t>(i)]
                                                              : "filler" + std::to_string(i));
  if (filler.empty()) filler.push_back(base_filler[0]);

  static const double band_lo[5] = {0.0, 3.0, 5.0, 7.0, 9.0};
  static const double band_hi[5] = {3.0, 5.0, 7.0, 9.0, 10.0};

  Rng rng(seed);
  std::vector<RawRow> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = i % 5;
    const auto& pool = pools[static_cast<size_t>(c)];
    const int len = 4 + rng.below(max_words - 3);
    std::string text;
    for (int k = 0; k < len; ++k) {
      const bool from_pool = k == 0 || rng.uniform01() < 0.6;
      const std::string& w = from_pool ? pool[rng.below(static_cast<int>(pool.size()))]
                                       : filler[rng.below(static_cast<int>(filler.size()))];
      if (!text.empty()) text += ' ';
      text += w;
    }
    // uppercase lead so the cleaner has real work to do
    text[0] = static_cast<char>(text[0] - 'a' + 'A');
    RawRow row;
    row.text = std::move(text);
    row.score = band_lo[c] + rng.uniform01() * (band_hi[c] - band_lo[c]);
    row.year = 2015 + rng.below(3);
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// records file round trip

inline void save_records(const std::string& path, const std::vector<Record>& records,
                         const Vocabulary& vocab, int t_max) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["t_max"] = t_max;
  j["vocab"] = {{"words", vocab.words}};
  nlohmann::json arr = nlohmann::json::array();
  for (const Record& r : records) {
    nlohmann::json e = {{"raw", r.raw_text},   {"clean", r.clean}, {"ids", r.ids},
                        {"score", r.score},    {"coarse", r.coarse}, {"fine", r.fine},
                        {"intensity", r.intensity}};
    if (r.year) e["year"] = *r.year;
    arr.push_back(std::move(e));
  }
  j["records"] = std::move(arr);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_records: cannot write " + path);
  out << j.dump(1) << '\n';
}

struct RecordsFile {
  std::vector<Record> records;
  Vocabulary vocab;
  int t_max = 0;
};

inline RecordsFile load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_records: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("load_records: " + path + " is not valid JSON: " + e.what());
  }
  if (j.value("format_version", 0) != 1)
    throw std::runtime_error("load_records: unsupported format_version in " + path);
  RecordsFile f;
  f.t_max = j.at("t_max").get<int>();
  f.vocab.words = j.at("vocab").at("words").get<std::vector<std::string>>();
  f.vocab.rebuild_index();
  for (const auto& e : j.at("records")) {
    Record r;
    r.raw_text = e.at("raw").get<std::string>();
    r.clean = e.at("clean").get<std::string>();
    r.ids = e.at("ids").get<std::vector<int>>();
    r.score = e.at("score").get<double>();
    r.coarse = e.at("coarse").get<int>();
    r.fine = e.at("fine").get<int>();
    r.intensity = e.at("intensity").get<double>();
    if (e.contains("year")) r.year = e.at("year").get<int>();
    if (static_cast<int>(r.ids.size()) != f.t_max)
      throw std::runtime_error("load_records: record id length disagrees with t_max");
    for (int id : r.ids)
      if (id < 0 || id >= f.vocab.size())
        throw std::runtime_error("load_records: token id " + std::to_string(id) +
                                 " outside the stored vocabulary");
    f.records.push_back(std::move(r));
  }
  return f;
}

}  // namespace dyfulm
