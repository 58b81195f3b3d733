#include <gtest/gtest.h>

#include <cmath>

#include "mvlens/error.hpp"
#include "mvlens/metrics.hpp"
#include "oracles.hpp"

namespace mvlens {
namespace {

std::vector<std::string> ids(std::initializer_list<const char*> v) { return {v.begin(), v.end()}; }

TEST(Ndcg, SinglePositiveAtRankOne) {
  const GradeMap g = {{"p", 1}};
  EXPECT_EQ(ndcg_at_k(ids({"p", "n1", "n2"}), g, 10), 1.0);
}

TEST(Ndcg, SinglePositiveAtRankTwo) {
  const GradeMap g = {{"p", 1}};
  EXPECT_NEAR(ndcg_at_k(ids({"n", "p"}), g, 10), 1.0 / std::log2(3.0), 1e-9);
  EXPECT_NEAR(ndcg_at_k(ids({"n", "p"}), g, 10), 0.63093, 1e-5);
}

TEST(Ndcg, NoPositivesGivesZero) {
  EXPECT_EQ(ndcg_at_k(ids({"a", "b"}), GradeMap{{"a", 0}}, 10), 0.0);
  EXPECT_EQ(ndcg_at_k(ids({"a", "b"}), GradeMap{}, 10), 0.0);
}

TEST(Ndcg, IdealIncludesItemsMissingFromRanking) {
  const GradeMap g = {{"p1", 1}, {"p2", 1}};
  EXPECT_NEAR(ndcg_at_k(ids({"p1", "n"}), g, 10), 1.0 / (1.0 + 1.0 / std::log2(3.0)), 1e-12);
}

TEST(Ndcg, CutoffZeroIsRejected) {
  try {
    ndcg_at_k(ids({"a"}), GradeMap{{"a", 1}}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(Ndcg, MatchesDefinitionOracle) {
  std::mt19937_64 gen(42);
  std::uniform_int_distribution<int> n_items(1, 20), grade(0, 3), kd(1, 12);
  for (int t = 0; t < 500; ++t) {
    const int n = n_items(gen);
    std::vector<std::string> ranking;
    GradeMap grades;
    std::vector<int> ranked_grades;
    for (int i = 0; i < n; ++i) {
      ranking.push_back("c" + std::to_string(i));
      const int g = grade(gen);
      if (g > 0 || i % 3 == 0) grades[ranking.back()] = g;
      ranked_grades.push_back(g);
    }
    // Judged items absent from the ranking.
    if (t % 4 == 0) grades["missing"] = grade(gen);
    const std::size_t k = static_cast<std::size_t>(kd(gen));
    const double expected = testing::ndcg_oracle(ranked_grades, testing::judged_grades(grades), k);
    const double got = ndcg_at_k(ranking, grades, k);
    ASSERT_NEAR(got, expected, 1e-9);
    ASSERT_GE(got, 0.0);
    ASSERT_LE(got, 1.0 + 1e-12);
  }
}

TEST(Ndcg, BeneficialSwapAndIrrelevantRemovalNeverHurt) {
  std::mt19937_64 gen(43);
  std::uniform_int_distribution<int> grade(0, 2);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::string> ranking;
    GradeMap grades;
    for (int i = 0; i < 15; ++i) {
      ranking.push_back("c" + std::to_string(i));
      grades[ranking.back()] = grade(gen);
    }
    const double base = ndcg_at_k(ranking, grades, 10);
    for (std::size_t i = 0; i + 1 < ranking.size(); ++i) {
      if (grades[ranking[i]] == 0 && grades[ranking[i + 1]] > 0) {
        auto swapped = ranking;
        std::swap(swapped[i], swapped[i + 1]);
        EXPECT_GE(ndcg_at_k(swapped, grades, 10), base);
      }
    }
    std::size_t first_relevant = ranking.size();
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      if (grades[ranking[i]] > 0) {
        first_relevant = i;
        break;
      }
    }
    for (std::size_t i = 0; i < first_relevant; ++i) {
      auto removed = ranking;
      removed.erase(removed.begin() + static_cast<std::ptrdiff_t>(i));
      EXPECT_GE(ndcg_at_k(removed, grades, 10), base);
    }
  }
}

TEST(Qrels, RejectsNegativeGrades) {
  Qrels q;
  EXPECT_THROW(q.set("q", "c", -1), Error);
  q.set("q", "c", 0);
  EXPECT_FALSE(q.has_positive("q"));
  q.set("q", "d", 2);
  EXPECT_TRUE(q.has_positive("q"));
  EXPECT_EQ(q.find("zz"), nullptr);
}

TEST(Evaluate, PerfectRunScoresOne) {
  const auto run = testing::make_run({"a", "b", "c"}, {{"q1", {"a", "b", "c"}}, {"q2", {"c", "a", "b"}}});
  Qrels qrels;
  qrels.set("q1", "a", 1);
  qrels.set("q2", "c", 2);
  qrels.set("q2", "a", 1);
  const auto report = evaluate_run(run, qrels, 10);
  EXPECT_EQ(report.mean, 1.0);
  ASSERT_EQ(report.per_query.size(), 2u);
}

TEST(Evaluate, MeanOfOneAndZero) {
  const auto run = testing::make_run({"a", "b"}, {{"q1", {"a", "b"}}, {"q2", {"a", "b"}}});
  Qrels qrels;
  qrels.set("q1", "a", 1);
  qrels.set("q2", "x", 1);
  const auto report = evaluate_run(run, qrels, 10);
  EXPECT_EQ(report.mean, 0.5);
}

TEST(Evaluate, SkipsAndCounts) {
  const auto run = testing::make_run({"a", "b"}, {{"q1", {"a", "b"}}, {"q2", {"a", "b"}}, {"q3", {"b", "a"}}});
  Qrels qrels;
  qrels.set("q1", "b", 1);
  qrels.set("q2", "a", 0);
  qrels.set("q9", "a", 1);
  const auto report = evaluate_run(run, qrels, 10);
  EXPECT_EQ(report.per_query.size(), 1u);
  EXPECT_EQ(report.skipped_not_in_qrels, 1u);
  EXPECT_EQ(report.skipped_no_positive, 1u);
  EXPECT_EQ(report.missing_from_run, 1u);
  EXPECT_NEAR(report.mean, 1.0 / std::log2(3.0), 1e-12);
}

TEST(Evaluate, NoOverlapIsAnError) {
  const auto run = testing::make_run({"a"}, {{"q1", {"a"}}});
  Qrels qrels;
  qrels.set("other", "a", 1);
  try {
    evaluate_run(run, qrels, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyIntersection);
  }
}

TEST(Evaluate, MeanMatchesBruteForce) {
  std::mt19937_64 gen(44);
  std::vector<std::string> chunks;
  for (int c = 0; c < 40; ++c) chunks.push_back("c" + std::to_string(c));
  std::vector<std::pair<std::string, std::vector<std::string>>> rankings;
  Qrels qrels;
  std::uniform_int_distribution<int> grade(0, 3), pick(0, 39);
  for (int q = 0; q < 50; ++q) {
    auto order = chunks;
    std::shuffle(order.begin(), order.end(), gen);
    const std::string qid = "q" + std::to_string(q);
    for (int j = 0; j < 3; ++j) qrels.set(qid, chunks[pick(gen)], grade(gen));
    qrels.set(qid, chunks[pick(gen)], 1 + grade(gen));
    rankings.emplace_back(qid, order);
  }
  const auto run = testing::make_run(chunks, rankings);
  const auto report = evaluate_run(run, qrels, 10);
  double sum = 0.0;
  for (const auto& [qid, order] : rankings) {
    const auto& g = *qrels.find(qid);
    std::vector<int> ranked;
    for (const auto& c : order) ranked.push_back(grade_of(g, c));
    sum += testing::ndcg_oracle(ranked, testing::judged_grades(g), 10);
  }
  EXPECT_NEAR(report.mean, sum / 50.0, 1e-12);
}

}  // namespace
}  // namespace mvlens
