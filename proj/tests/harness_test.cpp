#include <gtest/gtest.h>

#include <cstdlib>

#include "harness_support.hpp"
#include "test_support.hpp"

namespace l2d {
namespace {

namespace fs = std::filesystem;
using testing_support::stable_report;

using testing_support::small_spec;

class Harness : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = generate_synthetic(small_spec());
    in_ = testing_support::synthetic_inputs(data_);
    config_ = testing_support::small_config();
  }

  RunReport run(const RunConfig& c) { return run_pipeline(c, in_, majority_); }

  SyntheticData data_;
  PipelineInputs in_;
  RunConfig config_;
  MockMajorityClient majority_;
  MockEchoClient echo_;
};

TEST_F(Harness, EchoIsPerfect) {
  const auto r = run_pipeline(config_, in_, echo_);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.n_total, data_.test.size());
  EXPECT_EQ(r.n_abstain, 0u);
}

TEST_F(Harness, TraceShapes) {
  const auto r = run(config_);
  ASSERT_EQ(r.per_example.size(), data_.test.size());
  for (std::size_t i = 0; i < r.per_example.size(); ++i) {
    const auto& t = r.per_example[i];
    EXPECT_EQ(t.test_id, data_.test.examples[i].id);
    EXPECT_EQ(t.gold, data_.test.examples[i].label);
    ASSERT_EQ(t.selected.size(), 4u);
    // best-last order
    for (std::size_t j = 1; j < t.selected.size(); ++j) {
      EXPECT_LE(t.selected[j - 1].s_hybrid, t.selected[j].s_hybrid);
    }
  }
  EXPECT_EQ(r.effective_alpha, 0.5);
  EXPECT_EQ(r.config_echo.at("method"), "topk_l2d");
}

TEST_F(Harness, RandomIsSeededAndThreadIndependent) {
  config_.method = Method::random;
  config_.parallelism = 1;
  const auto a = run(config_);
  config_.parallelism = 8;
  auto b = run(config_);
  EXPECT_EQ(a.selected_ids(), b.selected_ids());
  b.config_echo["parallelism"] = 1;
  EXPECT_EQ(stable_report(a), stable_report(b));
  config_.seed = 43;
  EXPECT_NE(run(config_).selected_ids(), a.selected_ids());
}

TEST_F(Harness, ParallelismDoesNotChangeReports) {
  config_.parallelism = 1;
  const auto a = run(config_);
  config_.parallelism = 7;
  auto b = run(config_);
  b.config_echo["parallelism"] = 1;
  EXPECT_EQ(stable_report(a), stable_report(b));
}

TEST_F(Harness, WithoutLabelTermEqualsTopK) {
  config_.method = Method::wo_l2d;
  const auto wo = run(config_);
  config_.method = Method::topk;
  const auto topk = run(config_);
  EXPECT_EQ(wo.selected_ids(), topk.selected_ids());
  EXPECT_EQ(wo.effective_alpha, 1.0);

  PipelineInputs bare = in_;
  bare.pool_distributions.reset();
  bare.test_distributions.reset();
  EXPECT_EQ(run_pipeline(config_, bare, majority_).selected_ids(), topk.selected_ids());
}

TEST_F(Harness, UniformDistributionsReduceToTopK) {
  config_.method = Method::topk;
  const auto topk = run(config_);
  PipelineInputs uniform = in_;
  uniform.pool_distributions = uniform_distributions(data_.pool);
  uniform.test_distributions = uniform_distributions(data_.test);
  config_.method = Method::topk_l2d;
  for (double a : {0.0, 0.5, 1.0}) {
    config_.selection.alpha = a;
    EXPECT_EQ(run_pipeline(config_, uniform, majority_).selected_ids(), topk.selected_ids()) << a;
  }
}

TEST_F(Harness, AlphaSweepEndpoints) {
  const auto points = sweep(config_, in_, majority_, SweepDimension::alpha, {0.0, 0.5, 1.0});
  ASSERT_EQ(points.size(), 3u);
  for (const auto& p : points) ASSERT_TRUE(p.report) << p.error;
  config_.method = Method::wo_sem;
  EXPECT_EQ(points[0].report->selected_ids(), run(config_).selected_ids());
  config_.method = Method::topk;
  EXPECT_EQ(points[2].report->selected_ids(), run(config_).selected_ids());
}

TEST_F(Harness, ShotAndCandidateSweeps) {
  const auto shots = sweep(config_, in_, majority_, SweepDimension::n_shot, {1, 2, 4, 8, 13, 0, 2.5});
  ASSERT_EQ(shots.size(), 7u);
  for (std::size_t i = 0; i < 4; ++i) {
    ASSERT_TRUE(shots[i].report);
    EXPECT_EQ(shots[i].report->per_example[0].selected.size(), static_cast<std::size_t>(shots[i].value));
  }
  for (std::size_t i = 4; i < 7; ++i) {
    EXPECT_FALSE(shots[i].report);
    EXPECT_FALSE(shots[i].error.empty());
  }
  const auto ks = sweep(config_, in_, majority_, SweepDimension::k_candidates, {4, 30, 3});
  EXPECT_TRUE(ks[0].report);
  EXPECT_TRUE(ks[1].report);
  EXPECT_FALSE(ks[2].report);
}

TEST_F(Harness, AblateRunsEveryMethod) {
  const auto results = ablate(config_, in_, majority_);
  ASSERT_EQ(results.size(), 5u);
  EXPECT_EQ(results[0].first, Method::random);
  EXPECT_EQ(results[1].second.selected_ids(), results[4].second.selected_ids());
  PipelineInputs bare = in_;
  bare.pool_distributions.reset();
  bare.test_distributions.reset();
  EXPECT_EQ(ablate(config_, bare, majority_).size(), 2u);
}

TEST_F(Harness, ValidationErrors) {
  PipelineInputs bare = in_;
  bare.pool_distributions.reset();
  bare.test_distributions.reset();
  EXPECT_THROW(run_pipeline(config_, bare, majority_), ConfigError);
  RunConfig c = config_;
  c.selection.n_shot = 81;
  c.selection.k_candidates = 100;
  EXPECT_THROW(run(c), ConfigError);
  c = config_;
  c.selection.alpha = 2;
  EXPECT_THROW(run(c), ConfigError);
  PipelineInputs missing = in_;
  missing.test_embeddings = EmbeddingStore{};
  missing.test_embeddings.add("nope", EmbeddingVector({1, 0, 0, 0, 0, 0}));
  EXPECT_THROW(run_pipeline(config_, missing, majority_), ConfigError);
}

TEST_F(Harness, Perturbations) {
  config_.perturbation = Perturbation::arbitrary;
  EXPECT_EQ(run_pipeline(config_, in_, echo_).accuracy, 1.0);
  config_.perturbation = Perturbation::reversed;
  config_.method = Method::topk;
  const auto rev = run(config_);
  config_.perturbation = Perturbation::none;
  const auto faithful = run(config_);
  EXPECT_EQ(rev.selected_ids(), faithful.selected_ids());
  for (std::size_t i = 0; i < rev.per_example.size(); ++i) {
    const auto& r = rev.per_example[i];
    const auto& f = faithful.per_example[i];
    // Even shot counts can tie, where majority falls back to class 0.
    if (r.predicted != 0 || f.predicted != 0) EXPECT_NE(r.predicted, f.predicted) << r.test_id;
  }

  SyntheticSpec spec = small_spec();
  spec.num_classes = 3;
  const auto three = generate_synthetic(spec);
  RunConfig c = config_;
  c.perturbation = Perturbation::reversed;
  EXPECT_THROW(run_pipeline(c, testing_support::synthetic_inputs(three), majority_), ConfigError);
}

TEST_F(Harness, OutOfDomainPairingMapsPredictions) {
  PipelineInputs ood = in_;
  ood.test.label_map = LabelMap::from_names({"positive", "negative"});
  for (auto& ex : ood.test.examples) ex.label = 1 - ex.label;
  ood.pairing = make_ood_pair(ood.pool, ood.test);
  EXPECT_EQ(run_pipeline(config_, ood, echo_).accuracy, 1.0);
  const auto in_domain = run(config_);
  const auto mapped = run_pipeline(config_, ood, majority_);
  EXPECT_EQ(mapped.accuracy, in_domain.accuracy);
}

TEST_F(Harness, FilesMatchInMemoryInputs) {
  const auto dir = testing_support::temp_dir("harness_files");
  const auto files = write_synthetic(data_, dir);
  RunConfig c = testing_support::synthetic_config(files);
  c.selection = config_.selection;
  const auto from_files = run_pipeline(c);
  EXPECT_EQ(from_files.selected_ids(), run(config_).selected_ids());
  EXPECT_EQ(from_files.accuracy, run(config_).accuracy);
}

TEST_F(Harness, SameCorpusExcludesSelf) {
  const auto dir = testing_support::temp_dir("harness_self");
  const auto files = write_synthetic(data_, dir);
  RunConfig c = testing_support::synthetic_config(files);
  c.test_corpus = c.pool_corpus;
  c.test_embeddings = c.pool_embeddings;
  c.selection = config_.selection;
  for (Method m : {Method::topk, Method::random}) {
    c.method = m;
    const auto r = run_pipeline(c);
    ASSERT_EQ(r.n_total, data_.pool.size());
    for (const auto& t : r.per_example) {
      for (const auto& s : t.selected) EXPECT_NE(s.train_id, t.test_id);
    }
  }
}

TEST_F(Harness, PersistenceAndResume) {
  const auto dir = testing_support::temp_dir("harness_store");
  config_.report_dir = dir.string();
  const auto first = sweep(config_, in_, majority_, SweepDimension::alpha, {0.25, 0.75});
  EXPECT_FALSE(first[0].resumed);
  const auto id = run_id(with_sweep_value(config_, SweepDimension::alpha, 0.25));
  EXPECT_TRUE(fs::exists(dir / (id + ".json")));
  const auto index = testing_support::read(dir / "index.jsonl");
  EXPECT_EQ(std::count(index.begin(), index.end(), '\n'), 2);
  EXPECT_NE(index.find(id), std::string::npos);

  const auto second = sweep(config_, in_, majority_, SweepDimension::alpha, {0.25, 0.75, 1.0});
  EXPECT_TRUE(second[0].resumed);
  EXPECT_TRUE(second[1].resumed);
  EXPECT_FALSE(second[2].resumed);
  EXPECT_EQ(serialize_report(*second[0].report), serialize_report(*first[0].report));
}

TEST_F(Harness, ProviderFailureKeepsPartialTrace) {
  const auto dir = testing_support::temp_dir("harness_partial");
  config_.report_dir = dir.string();
  config_.completion = CompletionKind::remote;
  ProviderConfig remote;
  remote.kind = ProviderKind::remote;
  remote.endpoint = "http://127.0.0.1:1";
  remote.max_retries = 0;
  remote.timeout_ms = 200;
  config_.completion_remote = remote;
  const auto client = make_completion_client(config_);
  EXPECT_THROW(run_pipeline(config_, in_, *client), ProviderError);
  const auto partial = dir / (run_id(config_) + ".partial.json");
  ASSERT_TRUE(fs::exists(partial));
  const auto j = Json::parse(testing_support::read(partial));
  EXPECT_EQ(j.at("status"), "aborted");
  EXPECT_FALSE(fs::exists(dir / (run_id(config_) + ".json")));

  config_.completion_remote.reset();
  EXPECT_THROW(make_completion_client(config_), ConfigError);
}

TEST_F(Harness, ReportRoundTripIsByteIdentical) {
  const auto r = run(config_);
  const auto text = serialize_report(r);
  EXPECT_EQ(serialize_report(report_from_json(Json::parse(text))), text);
}

TEST_F(Harness, RunIdDependsOnConfig) {
  RunConfig other = config_;
  EXPECT_EQ(run_id(other), run_id(config_));
  other.parallelism = 3;
  EXPECT_EQ(run_id(other), run_id(config_));
  other.selection.alpha = 0.25;
  EXPECT_NE(run_id(other), run_id(config_));
  EXPECT_EQ(run_id(config_).size(), 16u);
}

TEST_F(Harness, GoldenReport) {
  const auto golden = fs::path(L2D_TEST_DATA_DIR) / "golden" / "run_report.json";
  const auto actual = stable_report(run(config_));
  if (std::getenv("L2D_UPDATE_GOLDEN")) {
    testing_support::write(golden, actual);
    GTEST_SKIP() << "golden rewritten";
  }
  EXPECT_EQ(actual, testing_support::read(golden));
}

}  // namespace
}  // namespace l2d
