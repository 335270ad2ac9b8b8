#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "propsel/curate.hpp"
#include "propsel/manager_io.hpp"

using namespace propsel;

namespace {

std::string teacher_response(int selected, bool with_think = true) {
  std::string out;
  if (with_think) out += "<think>candidate comparison</think>\n";
  out += "Best Proposal: #" + std::to_string(selected) + "\n";
  out += "it removes the cause\n";
  out += "## Problem p\n## Root Cause c\n## Solution s\n";
  return out;
}

}  // namespace

TEST_CASE("required sample size matches the published table") {
  CHECK(required_sample_size(2852, 0.05, 0.95) == 339);
  CHECK(required_sample_size(1, 0.05, 0.95) == 1);
  CHECK(required_sample_size(1000000000LL, 0.05, 0.95) == 385);
}

TEST_CASE("sample size rejects bad margins and confidences") {
  CHECK_THROWS_WITH_AS(required_sample_size(100, 0.0, 0.95), doctest::Contains("InvalidMargin"),
                       CurateError);
  CHECK_THROWS_AS(required_sample_size(100, 1.2, 0.95), CurateError);
  CHECK_THROWS_WITH_AS(required_sample_size(100, 0.05, 0.8), doctest::Contains("InvalidConfidence"),
                       CurateError);
  CHECK_THROWS_AS(required_sample_size(0, 0.05, 0.95), std::invalid_argument);
}

TEST_CASE("sample size is monotone in population and confidence, antitone in margin") {
  const long long populations[] = {10, 100, 339, 1000, 2852, 100000, 10000000};
  const double margins[] = {0.01, 0.02, 0.05, 0.08, 0.10};
  const double confidences[] = {0.90, 0.95, 0.99};
  for (const double margin : margins) {
    for (const double confidence : confidences) {
      int last = 0;
      for (const long long population : populations) {
        const int n = required_sample_size(population, margin, confidence);
        CHECK(n >= last);
        CHECK(n <= population);
        last = n;
      }
    }
  }
  for (const long long population : populations) {
    for (const double confidence : confidences) {
      int last = std::numeric_limits<int>::max();
      for (const double margin : margins) {
        const int n = required_sample_size(population, margin, confidence);
        CHECK(n <= last);
        last = n;
      }
    }
    for (const double margin : margins) {
      CHECK(required_sample_size(population, margin, 0.90) <=
            required_sample_size(population, margin, 0.95));
      CHECK(required_sample_size(population, margin, 0.95) <=
            required_sample_size(population, margin, 0.99));
    }
  }
}

TEST_CASE("leakage filtering removes by id and by repo#issue") {
  std::vector<ManagerInstance> train = {
      fixtures::make_instance("a", 1, 100, 2, 1),
      fixtures::make_instance("b", 2, 100, 2, 1),
  };
  LeakageKeys keys;
  keys.ids.insert("a");
  const auto [kept, report] = filter_leakage(train, keys);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].issue.id == "b");
  CHECK(report.removed_ids == std::vector<std::string>{"a"});
  CHECK(report.n_kept == 1);

  LeakageKeys disjoint;
  disjoint.ids.insert("zz");
  const auto [unchanged, empty_report] = filter_leakage(train, disjoint);
  CHECK(unchanged == train);
  CHECK(empty_report.removed_ids.empty());
}

TEST_CASE("leakage collisions under different ids are both removed") {
  // Benchmark knows the issue as bench-7; training carries it twice under
  // other ids but the same repo#number.
  std::vector<ManagerInstance> train = {
      fixtures::make_instance("train-1", 7, 100, 2, 1),
      fixtures::make_instance("train-2", 7, 100, 2, 1),
      fixtures::make_instance("train-3", 8, 100, 2, 1),
  };
  const ManagerInstance benchmark = fixtures::make_instance("bench-7", 7, 100, 2, 1);
  const LeakageKeys keys = LeakageKeys::from_instances({benchmark});
  const auto [kept, report] = filter_leakage(train, keys);

  // Independent key scan over the fixture.
  std::size_t expected_removed = 0;
  for (const ManagerInstance& instance : train) {
    if (instance.issue.id == "bench-7" ||
        (instance.issue.repo == benchmark.issue.repo &&
         instance.issue.issue_number == benchmark.issue.issue_number)) {
      ++expected_removed;
    }
  }
  CHECK(expected_removed == 2);
  CHECK(report.removed_ids.size() == expected_removed);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].issue.id == "train-3");
}

TEST_CASE("leakage filtering is idempotent") {
  std::mt19937_64 rng(71);
  std::vector<ManagerInstance> train;
  for (int i = 0; i < 40; ++i) {
    train.push_back(fixtures::random_instance(rng, "t" + std::to_string(i)));
  }
  LeakageKeys keys;
  for (int i = 0; i < 40; i += 3) keys.ids.insert("t" + std::to_string(i));
  const auto [once, report_once] = filter_leakage(train, keys);
  const auto [twice, report_twice] = filter_leakage(once, keys);
  CHECK(once == twice);
  CHECK(report_twice.removed_ids.empty());
}

TEST_CASE("teacher annotation accepts a consistent response") {
  const ManagerInstance instance = fixtures::make_instance("a", 1, 250, 3, 2);
  auto teacher = MockBackend::sequential({teacher_response(2)});
  const AnnotatedInstance annotated = build_sft_target(instance, *teacher, ManagerRunConfig{});
  CHECK(annotated.reference.instance_id == "a");
  CHECK(annotated.reference.ground_truth_id == 2);
  CHECK(annotated.reference.think == "candidate comparison");
  CHECK(annotated.reference.golden.solution == "s");
  CHECK(annotated.teacher_model == "mock");
  // The prompt carries the ground truth for anchoring.
  CHECK(teacher->history()[0].messages[0].content.find("#2") != std::string::npos);
}

TEST_CASE("teacher disagreement and format failure are distinct, after retries") {
  const ManagerInstance instance = fixtures::make_instance("a", 1, 250, 3, 2);
  ManagerRunConfig config;
  config.max_parse_retries = 1;

  auto stubborn = MockBackend::sequential({teacher_response(1), teacher_response(3)});
  CHECK_THROWS_WITH_AS(build_sft_target(instance, *stubborn, config),
                       doctest::Contains("TeacherDisagreement"), CurateError);
  CHECK(stubborn->calls() == 2);

  auto sloppy = MockBackend::sequential({"nonsense", "Best Proposal: #2\nno sections"});
  CHECK_THROWS_WITH_AS(build_sft_target(instance, *sloppy, config),
                       doctest::Contains("TeacherFormatFailure"), CurateError);

  auto thinkless = MockBackend::sequential(
      {teacher_response(2, false), teacher_response(2, false)});
  CHECK_THROWS_AS(build_sft_target(instance, *thinkless, config), CurateError);

  // Disagreement then consistency: the retry recovers.
  auto corrected = MockBackend::sequential({teacher_response(1), teacher_response(2)});
  CHECK(build_sft_target(instance, *corrected, config).reference.ground_truth_id == 2);
}

TEST_CASE("annotated datasets round-trip through JSONL") {
  const ManagerInstance instance = fixtures::make_instance("a", 1, 250, 3, 2);
  auto teacher = MockBackend::sequential({teacher_response(2)});
  const AnnotatedInstance annotated = build_sft_target(instance, *teacher, ManagerRunConfig{});
  const auto dir = std::filesystem::temp_directory_path() / "propsel_curate_tests";
  std::filesystem::create_directories(dir);
  write_annotated(dir / "annotated.jsonl", {annotated});
  const auto reread = read_annotated(dir / "annotated.jsonl");
  REQUIRE(reread.size() == 1);
  CHECK(reread[0].instance == annotated.instance);
  CHECK(reread[0].reference.think == annotated.reference.think);
  CHECK(reread[0].reference.golden == annotated.reference.golden);
  CHECK(reread[0].teacher_model == annotated.teacher_model);
}

TEST_CASE("token length stats follow the declared conventions") {
  CHECK(length_stats_from_values({4}).mean == doctest::Approx(4));
  CHECK(length_stats_from_values({4}).median == doctest::Approx(4));
  CHECK(length_stats_from_values({4}).p90 == doctest::Approx(4));

  const TokenLengthStats stats = length_stats_from_values({2, 4, 10});
  CHECK(stats.mean == doctest::Approx(16.0 / 3.0));
  CHECK(stats.median == doctest::Approx(4));
  CHECK(stats.p90 == doctest::Approx(10));  // nearest rank: ceil(0.9*3) = 3rd

  CHECK(length_stats_from_values({1, 2, 3, 4}).median == doctest::Approx(2.5));
  CHECK_THROWS_WITH_AS(token_length_stats({}), doctest::Contains("EmptyDataset"), CurateError);
}

TEST_CASE("token length stats run over rendered prompts with an injectable counter") {
  std::vector<ManagerInstance> instances;
  for (int i = 0; i < 7; ++i) {
    instances.push_back(fixtures::make_instance("l" + std::to_string(i), i + 1, 100, 2 + i % 3, 1));
  }
  const TokenLengthStats by_chars = token_length_stats(
      instances, [](const std::string& text) { return text.size(); });
  const TokenLengthStats by_tokens = token_length_stats(instances);
  CHECK(by_chars.mean > by_tokens.mean);  // chars outnumber whitespace tokens

  std::mt19937_64 rng(73);
  for (int round = 0; round < 20; ++round) {
    std::vector<std::size_t> lengths;
    std::uniform_int_distribution<std::size_t> value(0, 500);
    const int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) lengths.push_back(value(rng));
    const auto sorted_min = *std::min_element(lengths.begin(), lengths.end());
    const auto sorted_max = *std::max_element(lengths.begin(), lengths.end());
    const TokenLengthStats stats = length_stats_from_values(lengths);
    CHECK(stats.median >= sorted_min);
    CHECK(stats.median <= stats.p90);
    CHECK(stats.p90 <= sorted_max);
  }
}

TEST_CASE("the rationale tally reproduces the taxonomy totals") {
  const RationaleTally tally = tally_rationales(fixtures::rationale_fixture_339());
  CHECK(tally.total == 339);
  CHECK(tally.by_theme.at(RationaleTheme::risk_and_safety) == 145);
  CHECK(tally.by_theme.at(RationaleTheme::fix_depth) == 99);
  CHECK(tally.by_theme.at(RationaleTheme::maintainability) == 55);
  CHECK(tally.by_theme.at(RationaleTheme::others) == 40);
  CHECK(tally.by_criterion.at(RationaleCriterion::minimal_verifiable_change) == 86);
  CHECK(tally.by_criterion.at(RationaleCriterion::root_cause_elimination) == 68);

  std::size_t theme_sum = 0;
  for (const auto& [theme, count] : tally.by_theme) theme_sum += count;
  CHECK(theme_sum == tally.total);

  const RationaleTally empty = tally_rationales({});
  CHECK(empty.total == 0);
  CHECK(empty.by_theme.empty());
}

TEST_CASE("criteria bind to their themes") {
  CHECK(theme_of(RationaleCriterion::minimal_verifiable_change) ==
        RationaleTheme::risk_and_safety);
  CHECK(theme_of(RationaleCriterion::delivery_speed_tie_break) == RationaleTheme::others);
  CHECK_THROWS_AS(SelectionRationale::make(RationaleTheme::others,
                                           RationaleCriterion::root_cause_elimination),
                  std::invalid_argument);
  CHECK(criterion_from_string("repo_constraint_conformance") ==
        RationaleCriterion::repo_constraint_conformance);
  CHECK_THROWS_AS(criterion_from_string("nope"), CurateError);
}
