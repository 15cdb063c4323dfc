#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <utility>

#include "bofx/pipeline.h"

namespace bofx {
namespace {

namespace fs = std::filesystem;

TEST(ClassifyWindow, Kinds) {
  const std::vector<AccidentEvent> ev = {{"w", AccidentType::Stuck, 10000, 8000, 10300}};
  const double off = 600;
  EXPECT_EQ(classify_window(8600, "w", ev, AccidentType::Stuck, off), WindowKind::kPositive);
  EXPECT_EQ(classify_window(10000, "w", ev, AccidentType::Stuck, off), WindowKind::kPositive);
  EXPECT_EQ(classify_window(8300, "w", ev, AccidentType::Stuck, off), WindowKind::kGray);
  EXPECT_EQ(classify_window(10200, "w", ev, AccidentType::Stuck, off), WindowKind::kGray);
  EXPECT_EQ(classify_window(13800, "w", ev, AccidentType::Stuck, off), WindowKind::kGray);
  EXPECT_EQ(classify_window(14000, "w", ev, AccidentType::Stuck, off), WindowKind::kNegative);
  EXPECT_EQ(classify_window(7000, "w", ev, AccidentType::Stuck, off), WindowKind::kNegative);
  EXPECT_EQ(classify_window(9000, "v", ev, AccidentType::Stuck, off), WindowKind::kNegative);
  EXPECT_EQ(classify_window(9000, "w", ev, AccidentType::Washout, off), WindowKind::kNegative);
}

class SmallData : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    GenConfig gen;
    gen.wells = 5;
    gen.hours = 4;
    gen.schedule = {1, 1, 1, 1};
    gen.seed = 3;
    const SyntheticData d = generate(gen);
    data_ = new Dataset{d.logs, d.events, d.references};
    config_ = new ExperimentConfig;
    config_->codebooks.k = kClustersPerChannel;
    config_->codebooks.max_points_per_channel = 600;
    config_->codebooks.max_iterations = 20;
    std::vector<std::size_t> ids(data_->logs.size());
    std::iota(ids.begin(), ids.end(), 0);
    books_ = new CodebookSet(fit_codebooks(data_->logs, ids, *config_, 1));
    table_ = new WindowTable(build_window_table(data_->logs, ids, data_->events, *books_, *config_));
  }
  static void TearDownTestSuite() {
    delete table_;
    delete books_;
    delete config_;
    delete data_;
  }

  static Dataset* data_;
  static ExperimentConfig* config_;
  static CodebookSet* books_;
  static WindowTable* table_;
};

Dataset* SmallData::data_ = nullptr;
ExperimentConfig* SmallData::config_ = nullptr;
CodebookSet* SmallData::books_ = nullptr;
WindowTable* SmallData::table_ = nullptr;

TEST_F(SmallData, TableRowsAreHistograms) {
  const WindowTable& t = *table_;
  ASSERT_GT(t.rows(), 0u);
  const std::size_t per_channel = config_->tau.count();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.x.row(r);
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      const double s = std::accumulate(row.begin() + long(c * kClustersPerChannel),
                                       row.begin() + long((c + 1) * kClustersPerChannel), 0.0);
      ASSERT_EQ(s, double(per_channel));
    }
  }
}

TEST_F(SmallData, EveryTypeHasPositivesAndNegatives) {
  for (AccidentType type : kAllAccidentTypes) {
    const auto& l = table_->labels[index_of(type)];
    EXPECT_GT(std::count(l.begin(), l.end(), 1), 0) << to_string(type);
    EXPECT_GT(std::count(l.begin(), l.end(), 0), 0) << to_string(type);
  }
}

TEST_F(SmallData, LabelsAgreeWithClassification) {
  const double off = config_->positive_offset_minutes * 60.0;
  for (std::size_t r = 0; r < table_->rows(); ++r)
    for (AccidentType type : kAllAccidentTypes) {
      const int y = table_->labels[index_of(type)][r];
      const WindowKind k = classify_window(table_->end_time[r], table_->well_id[r], data_->events, type, off);
      if (y == 1) EXPECT_EQ(k, WindowKind::kPositive);
      if (y == 0) EXPECT_EQ(k, WindowKind::kNegative);
      if (k == WindowKind::kGray) EXPECT_EQ(y, -1);
    }
}

TEST_F(SmallData, TableRoundTrip) {
  const fs::path p = fs::temp_directory_path() / ("bofx-table-" + std::to_string(::getpid()) + ".csv");
  write_window_table(*table_, p.string());
  const WindowTable back = read_window_table(p.string());
  fs::remove(p);
  ASSERT_EQ(back.rows(), table_->rows());
  EXPECT_EQ(back.well_id, table_->well_id);
  EXPECT_EQ(back.end_time, table_->end_time);
  EXPECT_EQ(back.labels, table_->labels);
  for (std::size_t r = 0; r < back.rows(); ++r) {
    const std::span<const float> a = back.x.row(r), b = std::as_const(*table_).x.row(r);
    ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_F(SmallData, GbmTrainingIsDeterministic) {
  ExperimentConfig cfg = *config_;
  cfg.gbm.estimators = 5;
  const GbmModel a = train_type_gbm(*table_, AccidentType::Stuck, cfg, 9);
  const GbmModel b = train_type_gbm(*table_, AccidentType::Stuck, cfg, 9);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(HighlightedMoments, ParsesRecords) {
  const std::string text =
      R"({"well_id":"w1","time":1000,"type":"Stuck","taus":{"HKLA":[0,6],"TQA":[30]}})" "\n"
      R"({"well_id":"w2","time":2000.5,"type":"Washout","taus":{}})" "\n";
  const auto ms = read_highlighted_moments(text);
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[0].well_id, "w1");
  EXPECT_EQ(ms[0].type, AccidentType::Stuck);
  EXPECT_EQ(ms[0].tau_starts[index_of(Mnemonic::HKLA)], (std::vector<std::size_t>{0, 6}));
  EXPECT_EQ(ms[0].tau_starts[index_of(Mnemonic::TQA)], (std::vector<std::size_t>{30}));
  EXPECT_EQ(ms[1].time, 2000.5);
  EXPECT_EQ(ms[1].type, AccidentType::Washout);
}

TEST(Cases, JsonRoundTrip) {
  CaseFigure c;
  c.well_id = "well-01";
  c.type = AccidentType::KickFlow;
  c.time = 5000;
  c.segment_start_time = 1400;
  c.threshold = 0.4;
  c.region_start = 3000;
  c.region_end = 5300;
  for (auto& v : c.values) v.assign(kSegmentSamples, 1.5);
  c.probability.assign(kSegmentSamples, 0.25);
  c.references[index_of(Mnemonic::GASA)] = {{100, 200}};
  const auto back = cases_from_json(cases_json({c}));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].well_id, c.well_id);
  EXPECT_EQ(back[0].type, c.type);
  EXPECT_EQ(back[0].values, c.values);
  EXPECT_EQ(back[0].probability, c.probability);
  EXPECT_EQ(back[0].references, c.references);
  EXPECT_EQ(back[0].threshold, c.threshold);
}

}  // namespace
}  // namespace bofx
