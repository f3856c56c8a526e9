#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lsf/error.hpp"
#include "lsf/metrics.hpp"
#include "lsf/random.hpp"
#include "oracles.hpp"

namespace {

lsf::ScoredPredictions sp(std::vector<double> s, std::vector<int> y) { return {std::move(s), std::move(y)}; }

}  // namespace

TEST(AveragePrecision, HandCases) {
  EXPECT_NEAR(lsf::average_precision(sp({0.9, 0.8, 0.7, 0.6}, {1, 1, 0, 1})), 11.0 / 12.0, 1e-15);
  EXPECT_NEAR(lsf::average_precision(sp({0.9, 0.8, 0.7, 0.6}, {1, 1, 0, 1})), 0.9167, 1e-4);
  EXPECT_EQ(lsf::average_precision(sp({3, 2, 1, 0}, {1, 1, 0, 0})), 1.0);
  EXPECT_NEAR(lsf::average_precision(sp({1, 1, 1, 1}, {1, 0, 0, 0})), 0.25, 1e-15);
  EXPECT_THROW(lsf::average_precision(sp({1, 2}, {0, 0})), lsf::UndefinedMetricError);
}

TEST(AveragePrecision, AllPermutationsMatchOracle) {
  for (int n = 1; n <= 6; ++n) {
    for (int mask = 1; mask < (1 << n); ++mask) {
      std::vector<int> y(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = (mask >> i) & 1;
      // Scores with deliberate ties.
      std::vector<double> s(static_cast<std::size_t>(n));
      std::iota(s.begin(), s.end(), 0.0);
      for (auto& v : s) v = std::floor(v / 2.0);
      do {
        EXPECT_NEAR(lsf::average_precision(sp(s, y)), oracle::average_precision(s, y), 1e-12);
      } while (std::next_permutation(s.begin(), s.end()));
    }
  }
}

TEST(AveragePrecision, TiePermutationAndMonotoneInvariance) {
  lsf::Rng rng(1);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 300; ++i) {
    s.push_back(std::round(rng.normal() * 4.0) / 4.0);
    y.push_back(rng.uniform() < 0.3);
  }
  const double ap = lsf::average_precision(sp(s, y));
  const double auc = lsf::roc_auc(sp(s, y));
  std::vector<std::size_t> perm(s.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span(perm));
  std::vector<double> ps;
  std::vector<int> py;
  for (auto i : perm) {
    ps.push_back(s[i]);
    py.push_back(y[i]);
  }
  EXPECT_NEAR(lsf::average_precision(sp(ps, py)), ap, 1e-12);
  EXPECT_NEAR(lsf::roc_auc(sp(ps, py)), auc, 1e-12);
  std::vector<double> ts;
  for (double v : s) ts.push_back(std::exp(3.0 * v) + 7.0);
  EXPECT_NEAR(lsf::average_precision(sp(ts, y)), ap, 1e-12);
  EXPECT_NEAR(lsf::roc_auc(sp(ts, y)), auc, 1e-12);
}

TEST(AveragePrecision, RandomScoresNearPrevalence) {
  lsf::Rng rng(2);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 20000; ++i) {
    s.push_back(rng.uniform());
    y.push_back(rng.uniform() < 0.2);
  }
  EXPECT_NEAR(lsf::average_precision(sp(s, y)), 0.2, 0.02);
  EXPECT_NEAR(lsf::roc_auc(sp(s, y)), 0.5, 0.02);
}

TEST(Roc, MatchesMannWhitney) {
  lsf::Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) {
      s.push_back(std::round(rng.normal() * 3.0));
      y.push_back(static_cast<int>(rng.below(2)));
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(lsf::roc_auc(sp(s, y)), oracle::auc_rank(s, y), 1e-12);
  }
  EXPECT_EQ(lsf::roc_auc(sp({0.5, 0.5, 0.5}, {1, 0, 1})), 0.5);
  EXPECT_EQ(lsf::roc_auc(sp({2, 1}, {1, 0})), 1.0);
  EXPECT_EQ(lsf::roc_auc(sp({1, 2}, {1, 0})), 0.0);
  EXPECT_THROW(lsf::roc_auc(sp({1, 2}, {1, 1})), lsf::UndefinedMetricError);
}

TEST(Curves, Shape) {
  const auto preds = sp({0.1, 0.4, 0.4, 0.8, 0.9}, {0, 1, 0, 1, 1});
  const auto pr = lsf::pr_curve(preds);
  ASSERT_EQ(pr.size(), 4u);
  for (std::size_t i = 1; i < pr.size(); ++i) {
    EXPECT_LT(pr[i].threshold, pr[i - 1].threshold);
    EXPECT_GE(pr[i].recall, pr[i - 1].recall);
  }
  EXPECT_EQ(pr.back().recall, 1.0);
  EXPECT_NEAR(pr[2].precision, 3.0 / 4.0, 1e-15);
  const auto roc = lsf::roc_curve(preds);
  ASSERT_EQ(roc.size(), 5u);
  EXPECT_TRUE(std::isinf(roc.front().threshold));
  EXPECT_EQ(roc.front().fpr, 0.0);
  EXPECT_EQ(roc.back().fpr, 1.0);
  EXPECT_EQ(roc.back().tpr, 1.0);
  EXPECT_EQ(lsf::pr_curve_csv(pr).substr(0, 26), "threshold,precision,recall");
  EXPECT_EQ(lsf::roc_curve_csv(roc).substr(0, 16), "threshold,fpr,tp");
}

TEST(Scalar, HandCase) {
  const lsf::Confusion c{3, 1, 4, 2};
  const auto m = lsf::scalar_metrics(c);
  EXPECT_NEAR(*m.accuracy, 0.7, 1e-15);
  EXPECT_NEAR(*m.recall, 0.6, 1e-15);
  EXPECT_NEAR(*m.specificity, 0.8, 1e-15);
  EXPECT_NEAR(*m.precision, 0.75, 1e-15);
}

TEST(Scalar, ThresholdIsStrict) {
  const auto preds = sp({0.5, 0.6, 0.4, 0.5}, {1, 1, 0, 0});
  const auto c = lsf::confusion_at(preds, 0.5);
  EXPECT_EQ(c.tp, 1u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.tn, 2u);
  EXPECT_EQ(c.fp, 0u);
}

TEST(Scalar, InvertedScorer) {
  const auto m = lsf::scalar_metrics(sp({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}), 0.5);
  EXPECT_EQ(*m.accuracy, 0.0);
  EXPECT_EQ(*m.recall, 0.0);
  EXPECT_EQ(*m.specificity, 0.0);
}

TEST(Scalar, UndefinedRatiosAreEmpty) {
  const auto m = lsf::scalar_metrics(sp({0.1, 0.2}, {0, 0}), 0.5);
  EXPECT_FALSE(m.recall.has_value());
  EXPECT_FALSE(m.precision.has_value());
  EXPECT_EQ(*m.specificity, 1.0);
}

TEST(Predictions, Validation) {
  EXPECT_THROW(sp({1.0}, {1, 0}), lsf::ParameterError);
  EXPECT_THROW(sp({1.0}, {2}), lsf::ParameterError);
  EXPECT_THROW(sp({NAN}, {1}), lsf::ParameterError);
}

TEST(Report, JsonRoundTrip) {
  const auto r = lsf::evaluate(sp({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}), 0.5, "svm");
  EXPECT_NEAR(*r.ap, 0.8333333333333333, 1e-12);
  EXPECT_NEAR(*r.auc_roc, 0.75, 1e-15);
  const auto back = lsf::eval_report_from_json(lsf::to_json(r, true));
  EXPECT_EQ(back.model, "svm");
  EXPECT_EQ(back.n, 4u);
  EXPECT_EQ(back.n_pos, 2u);
  EXPECT_EQ(*back.ap, *r.ap);
  EXPECT_EQ(*back.auc_roc, *r.auc_roc);
  EXPECT_EQ(*back.scalars.accuracy, *r.scalars.accuracy);
  EXPECT_EQ(back.confusion.tp, r.confusion.tp);
  EXPECT_EQ(back.pr.size(), r.pr.size());
  EXPECT_EQ(lsf::to_json(back, true), lsf::to_json(r, true));

  const auto undefined = lsf::evaluate(sp({0.1, 0.9}, {0, 0}), 0.5);
  EXPECT_FALSE(undefined.ap.has_value());
  EXPECT_FALSE(undefined.auc_roc.has_value());
  const auto u2 = lsf::eval_report_from_json(lsf::to_json(undefined));
  EXPECT_FALSE(u2.ap.has_value());
  EXPECT_FALSE(u2.scalars.recall.has_value());
}
