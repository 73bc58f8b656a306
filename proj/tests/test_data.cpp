#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dyfulm/data.hpp"

using namespace dyfulm;
namespace fs = std::filesystem;

namespace {

TEST(CleanText, DropsNoiseAndNormalizes) {
  EXPECT_EQ(clean_text("Great stay! http://x.co @bob #fun"), "great stay fun");
  EXPECT_EQ(clean_text("Don't STOP"), "don't stop");
  EXPECT_EQ(clean_text("Price: $99.99!!"), "price 99 99");
  EXPECT_EQ(clean_text("  spaced\tout\nlines  "), "spaced out lines");
  EXPECT_EQ(clean_text("WWW.example.com only"), "only");
  EXPECT_EQ(clean_text("https://a.b/c?d=e"), "");
  EXPECT_EQ(clean_text("@you @me"), "");
  EXPECT_EQ(clean_text(""), "");
  EXPECT_EQ(clean_text("   "), "");
}

TEST(CleanText, IdempotentOnRandomStrings) {
  const std::string charset = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,!?#@'\"-_:/\t\n";
  Rng rng(123);
  for (int trial = 0; trial < 500; ++trial) {
    const int len = rng.below(60);
    std::string s;
    for (int i = 0; i < len; ++i) s += charset[static_cast<size_t>(rng.below(static_cast<int>(charset.size())))];
    const std::string once = clean_text(s);
    EXPECT_EQ(clean_text(once), once) << "raw: " << s;
  }
}

TEST(Labels, BandBoundaries) {
  struct Case {
    double score;
    int coarse, fine;
  };
  const Case cases[] = {{0.0, 0, 0},  {2.9999, 0, 0}, {3.0, 0, 1}, {4.9999, 0, 1},
                        {5.0, 1, 2},  {6.9999, 1, 2}, {7.0, 2, 3}, {8.8, 2, 3},
                        {8.9999, 2, 3}, {9.0, 2, 4},  {10.0, 2, 4}};
  for (const Case& c : cases) {
    const Labels l = build_labels(c.score);
    EXPECT_EQ(l.coarse, c.coarse) << "score " << c.score;
    EXPECT_EQ(l.fine, c.fine) << "score " << c.score;
    EXPECT_EQ(l.intensity, c.score / 10.0);
  }
  EXPECT_THROW(build_labels(-0.1), std::out_of_range);
  EXPECT_THROW(build_labels(10.1), std::out_of_range);
  EXPECT_THROW(build_labels(std::numeric_limits<double>::quiet_NaN()), std::out_of_range);
}

TEST(Vocab, CountsRankAndIds) {
  Vocabulary v = build_vocab({"a a b"});
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v.id_of("a"), 2);
  EXPECT_EQ(v.id_of("b"), 3);
  EXPECT_EQ(v.id_of("zzz"), Vocabulary::kUnk);

  // equal counts break ties alphabetically
  Vocabulary tie = build_vocab({"b a"});
  EXPECT_EQ(tie.id_of("a"), 2);
  EXPECT_EQ(tie.id_of("b"), 3);

  Vocabulary rare = build_vocab({"a a b"}, 2);
  EXPECT_EQ(rare.size(), 3);
  EXPECT_EQ(rare.id_of("b"), Vocabulary::kUnk);

  Vocabulary capped = build_vocab({"a a b"}, 1, 3);
  EXPECT_EQ(capped.size(), 3);
  EXPECT_EQ(capped.id_of("a"), 2);
  EXPECT_EQ(capped.id_of("b"), Vocabulary::kUnk);

  EXPECT_THROW(build_vocab({}), std::invalid_argument);
  EXPECT_THROW(build_vocab({"", "  "}), std::invalid_argument);
  EXPECT_THROW(build_vocab({"a"}, 0), std::invalid_argument);
  EXPECT_THROW(build_vocab({"a"}, 1, 1), std::invalid_argument);
}

TEST(Vocab, DeterministicAcrossRebuilds) {
  const std::vector<std::string> corpus = {"the room was clean", "the staff was rude", "room room"};
  Vocabulary a = build_vocab(corpus);
  Vocabulary b = build_vocab(corpus);
  EXPECT_EQ(a.words, b.words);
}

TEST(Tokenize, PadsTruncatesAndMapsUnknowns) {
  Vocabulary v = build_vocab({"a a b"});
  EXPECT_EQ(tokenize(v, "a b", 4), (std::vector<int>{2, 3, 0, 0}));
  EXPECT_EQ(tokenize(v, "c a", 4), (std::vector<int>{1, 2, 0, 0}));
  EXPECT_EQ(tokenize(v, "a b a b a", 3), (std::vector<int>{2, 3, 2}));
  EXPECT_EQ(tokenize(v, "", 3), (std::vector<int>{0, 0, 0}));
  EXPECT_THROW(tokenize(v, "a", 0), std::invalid_argument);
}

TEST(Stats, QuantileFollowsInterpolationRule) {
  const std::vector<double> scores = {7.5, 8.8, 10.0};
  EXPECT_EQ(quantile(scores, 0.0), 7.5);
  EXPECT_EQ(quantile(scores, 1.0), 10.0);
  EXPECT_NEAR(quantile(scores, 0.25), 8.15, 1e-12);
  EXPECT_EQ(quantile(scores, 0.5), 8.8);
  // order must not matter
  EXPECT_NEAR(quantile({10.0, 7.5, 8.8}, 0.25), 8.15, 1e-12);
  EXPECT_EQ(quantile({4.0}, 0.25), 4.0);
  EXPECT_THROW(quantile({}, 0.5), std::invalid_argument);
  EXPECT_THROW(quantile({1.0}, 1.5), std::invalid_argument);
}

TEST(Stats, GroupSummaryMatchesHandValues) {
  GroupStats g = stats_over("overall", {7.5, 8.8, 10.0});
  EXPECT_EQ(g.max, 10.0);
  EXPECT_NEAR(g.q25, 8.15, 1e-12);
  EXPECT_NEAR(g.mean, 26.3 / 3.0, 1e-12);
  EXPECT_EQ(g.median, 8.8);
}

TEST(Stats, DatasetGroupsOverallThenYears) {
  std::vector<Record> records;
  auto push = [&](double score, std::optional<int> year) {
    Record r;
    r.clean = "x";
    r.score = score;
    const Labels l = build_labels(score);
    r.coarse = l.coarse;
    r.fine = l.fine;
    r.intensity = l.intensity;
    r.year = year;
    records.push_back(r);
  };
  push(10.0, 2017);
  push(7.5, 2015);
  push(8.8, 2017);
  push(2.0, std::nullopt);
  DatasetStats s = dataset_stats(records);
  ASSERT_EQ(s.groups.size(), 3u);
  EXPECT_EQ(s.groups[0].group, "overall");
  EXPECT_EQ(s.groups[1].group, "2015");
  EXPECT_EQ(s.groups[2].group, "2017");
  EXPECT_EQ(s.groups[0].max, 10.0);
  EXPECT_EQ(s.groups[1].mean, 7.5);
  EXPECT_NEAR(s.groups[2].mean, 9.4, 1e-12);
  EXPECT_EQ(s.coarse_counts, (std::vector<long>{1, 0, 3}));
  EXPECT_EQ(s.fine_counts, (std::vector<long>{1, 0, 0, 2, 1}));
  EXPECT_THROW(dataset_stats({}), std::invalid_argument);
}

TEST(Synthetic, DeterministicAndBalanced) {
  const std::vector<RawRow> a = generate_synthetic(100, 50, 7);
  const std::vector<RawRow> b = generate_synthetic(100, 50, 7);
  ASSERT_EQ(a.size(), 100u);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].text, b[i].text);
    EXPECT_EQ(*a[i].score, *b[i].score);
    EXPECT_EQ(*a[i].year, *b[i].year);
  }
  std::vector<int> fine_counts(5, 0);
  for (size_t i = 0; i < a.size(); ++i) {
    const Labels l = build_labels(*a[i].score);
    EXPECT_EQ(l.fine, static_cast<int>(i % 5));
    ++fine_counts[static_cast<size_t>(l.fine)];
  }
  for (int c : fine_counts) EXPECT_EQ(c, 20);
  const std::vector<RawRow> other = generate_synthetic(100, 50, 8);
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i) differs |= a[i].text != other[i].text;
  EXPECT_TRUE(differs);
  EXPECT_THROW(generate_synthetic(0, 50, 1), std::invalid_argument);
  EXPECT_THROW(generate_synthetic(10, 7, 1), std::invalid_argument);
  EXPECT_THROW(generate_synthetic(10, 50, 1, 3), std::invalid_argument);
}

TEST(Pipeline, CleanRunHasNoViolations) {
  DataConfig dc;
  PipelineResult pr = run_pipeline(generate_synthetic(200, 50, 7), dc, 16);
  EXPECT_EQ(pr.records.size(), 200u);
  EXPECT_EQ(pr.dropped_empty + pr.dropped_no_score + pr.dropped_bad_score, 0);
  IntegrityReport rep = integrity_check(pr.records, pr.vocab, 16);
  EXPECT_EQ(rep.records, 200);
  EXPECT_EQ(rep.violations(), 0);
}

TEST(Pipeline, DropsBadRowsAndCountsThem) {
  std::vector<RawRow> rows;
  rows.push_back({"A fine room", 8.0, 2016});
  rows.push_back({"http://only.example", 6.0, std::nullopt});  // cleans to nothing
  rows.push_back({"no score here", std::nullopt, std::nullopt});
  rows.push_back({"score out of range", 12.0, std::nullopt});
  DataConfig dc;
  PipelineResult pr = run_pipeline(rows, dc, 8);
  ASSERT_EQ(pr.records.size(), 1u);
  EXPECT_EQ(pr.dropped_empty, 1);
  EXPECT_EQ(pr.dropped_no_score, 1);
  EXPECT_EQ(pr.dropped_bad_score, 1);
  const Record& r = pr.records[0];
  EXPECT_EQ(r.clean, "a fine room");
  EXPECT_EQ(r.coarse, 2);
  EXPECT_EQ(r.fine, 3);
  EXPECT_EQ(r.intensity, 0.8);
  EXPECT_EQ(*r.year, 2016);

  EXPECT_THROW(run_pipeline({}, dc, 8), std::runtime_error);
  EXPECT_THROW(run_pipeline({{"@gone", 5.0, std::nullopt}}, dc, 8), std::runtime_error);
}

TEST(Integrity, CountsEachTamperKind) {
  DataConfig dc;
  PipelineResult pr = run_pipeline(generate_synthetic(50, 50, 3), dc, 16);
  std::vector<Record> tampered = pr.records;
  tampered[0].score = 12.0;                         // out of range
  tampered[1].fine = (tampered[1].fine + 1) % 5;    // label disagrees
  tampered[2].clean = "Not Normalized";             // cleaner would change it
  tampered[3].ids.pop_back();                       // wrong length
  tampered[4].ids[0] = pr.vocab.size();             // id outside vocab
  tampered[5].ids.assign(16, Vocabulary::kPad);     // reads as empty
  IntegrityReport rep = integrity_check(tampered, pr.vocab, 16);
  EXPECT_EQ(rep.score_out_of_range, 1);
  EXPECT_EQ(rep.label_mismatch, 1);
  EXPECT_EQ(rep.not_normalized, 1);
  EXPECT_EQ(rep.bad_ids, 2);
  EXPECT_EQ(rep.empty_text, 1);
  EXPECT_EQ(rep.violations(), 6);
}

TEST(Csv, ParsesQuotesCommasAndNewlines) {
  std::istringstream in("a,b\n\"x,y\",\"he said \"\"hi\"\"\"\n\"l1\nl2\",2\n");
  const auto rows = parse_csv(in);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"x,y", "he said \"hi\""}));
  EXPECT_EQ(rows[2], (std::vector<std::string>{"l1\nl2", "2"}));
}

TEST(Csv, HandlesCrlfBlankLinesAndTrailingComma) {
  std::istringstream in("a,b\r\n\r\n1,\r\nlast");
  const auto rows = parse_csv(in);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"1", ""}));
  EXPECT_EQ(rows[2], (std::vector<std::string>{"last"}));
}

TEST(Csv, EscapeRoundTrips) {
  const std::vector<std::string> tricky = {"plain", "with,comma", "with \"quotes\"", "multi\nline", ""};
  std::string file;
  for (size_t i = 0; i < tricky.size(); ++i)
    file += csv_escape(tricky[i]) + (i + 1 < tricky.size() ? "," : "\n");
  std::istringstream in(file);
  const auto rows = parse_csv(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0], tricky);
}

TEST(Adapters, GenericCsv) {
  std::istringstream in("text,score,year\n\"Good, clean room\",8.5,2016\nbad,abc,\nempty,,2017\n");
  const auto rows = load_generic_csv(in);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].text, "Good, clean room");
  EXPECT_EQ(*rows[0].score, 8.5);
  EXPECT_EQ(*rows[0].year, 2016);
  EXPECT_FALSE(rows[1].score.has_value());
  EXPECT_FALSE(rows[1].year.has_value());
  EXPECT_FALSE(rows[2].score.has_value());
  EXPECT_EQ(*rows[2].year, 2017);

  std::istringstream missing("text,year\nx,2016\n");
  EXPECT_THROW(load_generic_csv(missing), std::runtime_error);
  std::istringstream empty("");
  EXPECT_THROW(load_generic_csv(empty), std::runtime_error);
}

TEST(Adapters, BookingCsvConcatenatesAndReadsYear) {
  std::istringstream in(
      "Hotel_Name,Review_Date,Reviewer_Score,Positive_Review,Negative_Review\n"
      "H1,8/3/2017,8.8,Nice pool,Small room\n"
      "H2,12/1/2015,9.6,Lovely staff,\n"
      "H3,2016,4.0,,Noisy at night\n");
  const auto rows = load_booking_csv(in);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].text, "Nice pool Small room");
  EXPECT_EQ(*rows[0].score, 8.8);
  EXPECT_EQ(*rows[0].year, 2017);
  EXPECT_EQ(rows[1].text, "Lovely staff");
  EXPECT_EQ(*rows[1].year, 2015);
  EXPECT_EQ(rows[2].text, "Noisy at night");
  EXPECT_FALSE(rows[2].year.has_value());

  std::istringstream missing("Reviewer_Score,Positive_Review\n1,2\n");
  EXPECT_THROW(load_booking_csv(missing), std::runtime_error);
}

class RecordsFileTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("dyfulm_records_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    path_ = (dir_ / "records.json").string();
  }
  void TearDown() override { fs::remove_all(dir_); }

  nlohmann::json read_json() {
    std::ifstream in(path_);
    nlohmann::json j;
    in >> j;
    return j;
  }
  void write_json(const nlohmann::json& j) {
    std::ofstream out(path_);
    out << j.dump(1);
  }

  fs::path dir_;
  std::string path_;
};

TEST_F(RecordsFileTest, RoundTripPreservesEverything) {
  DataConfig dc;
  PipelineResult pr = run_pipeline(generate_synthetic(30, 50, 5), dc, 12);
  save_records(path_, pr.records, pr.vocab, 12);
  RecordsFile f = load_records(path_);
  EXPECT_EQ(f.t_max, 12);
  EXPECT_EQ(f.vocab.words, pr.vocab.words);
  ASSERT_EQ(f.records.size(), pr.records.size());
  for (size_t i = 0; i < f.records.size(); ++i) {
    EXPECT_EQ(f.records[i].raw_text, pr.records[i].raw_text);
    EXPECT_EQ(f.records[i].clean, pr.records[i].clean);
    EXPECT_EQ(f.records[i].ids, pr.records[i].ids);
    EXPECT_EQ(f.records[i].score, pr.records[i].score);
    EXPECT_EQ(f.records[i].coarse, pr.records[i].coarse);
    EXPECT_EQ(f.records[i].fine, pr.records[i].fine);
    EXPECT_EQ(f.records[i].intensity, pr.records[i].intensity);
    EXPECT_EQ(f.records[i].year.has_value(), pr.records[i].year.has_value());
    if (f.records[i].year) EXPECT_EQ(*f.records[i].year, *pr.records[i].year);
  }
}

TEST_F(RecordsFileTest, RejectsTamperedFiles) {
  DataConfig dc;
  PipelineResult pr = run_pipeline(generate_synthetic(5, 50, 5), dc, 12);
  save_records(path_, pr.records, pr.vocab, 12);

  nlohmann::json good = read_json();

  nlohmann::json bad_version = good;
  bad_version["format_version"] = 99;
  write_json(bad_version);
  EXPECT_THROW(load_records(path_), std::runtime_error);

  nlohmann::json bad_id = good;
  bad_id["records"][0]["ids"][0] = 100000;
  write_json(bad_id);
  EXPECT_THROW(load_records(path_), std::runtime_error);

  nlohmann::json bad_len = good;
  bad_len["records"][0]["ids"].erase(0);
  write_json(bad_len);
  EXPECT_THROW(load_records(path_), std::runtime_error);

  EXPECT_THROW(load_records((dir_ / "missing.json").string()), std::runtime_error);
}

}  // namespace
