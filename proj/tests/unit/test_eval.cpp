#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mealsense/error.h"
#include "mealsense/eval/metrics.h"
#include "mealsense/eval/report.h"

using namespace mealsense;
using namespace mealsense::eval;

namespace {

CrowdLabel label(std::int64_t c, std::int64_t i, std::int64_t t, double secs = 90, std::int64_t split = -1,
                 std::string meal = "m1", std::string worker = "w1") {
  return {std::move(meal), std::move(worker), c, i, t, secs, split < 0 ? t : split};
}

ExpertEstimateMatrix matrix(const std::vector<std::vector<double>>& rows) {
  ExpertEstimateMatrix m;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.meal_ids.push_back("m" + std::to_string(i));
    m.values.emplace_back(rows[i].begin(), rows[i].end());
  }
  for (std::size_t j = 0; j < rows.at(0).size(); ++j) m.rater_ids.push_back("r" + std::to_string(j));
  return m;
}

}  // namespace

TEST_CASE("crowd filter rules") {
  CHECK(!rejection_reason(label(2, 3, 3)));
  CHECK(rejection_reason(label(4, 3, 5)) == std::optional<std::string>("C > I"));
  CHECK(rejection_reason(label(3, 5, 2)) == std::optional<std::string>("C > T"));
  CHECK(rejection_reason(label(2, 3, 3, 59)));
  CHECK(rejection_reason(label(2, 3, 3, 59.999)));
  CHECK(!rejection_reason(label(2, 3, 3, 60)));
  CHECK(rejection_reason(label(0, 0, 3)));
  CHECK(rejection_reason(label(0, 3, 0)));
  CHECK(rejection_reason(label(2, 3, 3, 90, 4)));
  CHECK(rejection_reason(label(-1, 3, 3)));
}

TEST_CASE("crowd filter is idempotent and order independent") {
  std::mt19937_64 rng(5);
  std::vector<CrowdLabel> labels;
  for (int n = 0; n < 300; ++n) {
    std::uniform_int_distribution<std::int64_t> d(0, 6);
    labels.push_back(label(d(rng), d(rng), d(rng), 40 + static_cast<double>(d(rng)) * 8, d(rng),
                           "m" + std::to_string(n % 7), "w" + std::to_string(n)));
  }
  const auto once = filter_crowd(labels);
  CHECK(!once.empty());
  CHECK(once.size() < labels.size());
  CHECK(filter_crowd(once) == once);
  auto shuffled = labels;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto a = once, b = filter_crowd(shuffled);
  auto by_worker = [](const CrowdLabel& x, const CrowdLabel& y) { return x.worker_id < y.worker_id; };
  std::sort(a.begin(), a.end(), by_worker);
  std::sort(b.begin(), b.end(), by_worker);
  CHECK(a == b);
}

TEST_CASE("prf from C, I, T") {
  const auto m = prf(label(2, 3, 3));
  CHECK(m.precision == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(m.recall == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(m.f1 == doctest::Approx(2.0 / 3).epsilon(1e-15));

  const auto perfect = prf(label(4, 4, 4));
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  const auto zero = prf(label(0, 3, 2));
  CHECK(zero.precision == 0);
  CHECK(zero.recall == 0);
  CHECK(zero.f1 == 0);

  CHECK_THROWS_AS(prf(label(4, 3, 5)), Error);

  for (std::int64_t c = 0; c <= 5; ++c)
    for (std::int64_t i = std::max<std::int64_t>(c, 1); i <= 6; ++i)
      for (std::int64_t t = std::max<std::int64_t>(c, 1); t <= 6; ++t) {
        const auto x = prf(label(c, i, t));
        CHECK(x.precision >= 0);
        CHECK(x.recall <= 1);
        if (x.precision > 0 && x.recall > 0) {
          CHECK(x.f1 == doctest::Approx(2 * x.precision * x.recall / (x.precision + x.recall)));
          CHECK(x.f1 >= std::min(x.precision, x.recall) - 1e-12);
          CHECK(x.f1 <= std::max(x.precision, x.recall) + 1e-12);
        }
      }
}

TEST_CASE("meal level prf is the mean over qualified workers, corpus the mean over meals") {
  const std::vector<CrowdLabel> labels{label(2, 3, 3, 90, -1, "a", "w1"), label(3, 3, 3, 90, -1, "a", "w2"),
                                       label(4, 3, 3, 90, -1, "a", "w3"),  // rejected
                                       label(1, 2, 2, 90, -1, "b", "w1")};
  const auto meals = meal_prf(labels);
  REQUIRE(meals.size() == 2);
  CHECK(meals[0].meal_id == "a");
  CHECK(meals[0].workers == 2);
  CHECK(meals[0].mean.f1 == doctest::Approx((2.0 / 3 + 1.0) / 2));
  CHECK(meals[1].mean.precision == doctest::Approx(0.5));
  const auto corpus = corpus_prf(meals);
  CHECK(corpus.f1 == doctest::Approx(((2.0 / 3 + 1.0) / 2 + 0.5) / 2));
}

TEST_CASE("mape") {
  const std::vector<double> e{100}, s{90};
  CHECK(mape(e, s).percent == doctest::Approx(10.0).epsilon(1e-12));
  const std::vector<double> same{3, 4, 5};
  CHECK(mape(same, same).percent == 0.0);

  const std::vector<double> e2{100, 0, 50}, s2{110, 3, 40};
  const auto r = mape(e2, s2);
  CHECK(r.used == 2);
  CHECK(r.excluded == std::vector<std::size_t>{1});
  CHECK(r.percent == doctest::Approx(15.0));

  std::vector<double> e3{12, 7.5, 300, 44}, s3{10, 9, 280, 50};
  const double base = mape(e3, s3).percent;
  for (double c : {0.001, 3.0, 1e6}) {
    auto ec = e3, sc = s3;
    for (auto& v : ec) v *= c;
    for (auto& v : sc) v *= c;
    CHECK(mape(ec, sc).percent == doctest::Approx(base).epsilon(1e-12));
  }
  const std::vector<double> zeros{0, 0}, two{1, 2};
  CHECK_THROWS_AS(mape(zeros, two), Error);
  CHECK_THROWS_AS(mape(e, two), Error);
}

TEST_CASE("icc2k identical raters is 1") {
  CHECK(icc2k(matrix({{1, 1, 1}, {5, 5, 5}, {2.5, 2.5, 2.5}, {9, 9, 9}})).value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("icc2k matches hand-computed mean squares") {
  // rows (9,2) (6,1) (8,4) (7,1): MSR = 17/6, MSC = 121/2, MSE = 5/6, ICC = 8/71
  const auto r = icc2k(matrix({{9, 2}, {6, 1}, {8, 4}, {7, 1}}));
  CHECK(std::abs(r.msr - 17.0 / 6) < 1e-12);
  CHECK(std::abs(r.msc - 121.0 / 2) < 1e-12);
  CHECK(std::abs(r.mse - 5.0 / 6) < 1e-12);
  CHECK(std::abs(r.value - 8.0 / 71) < 1e-9);

  // constant shift with strong meal variance: MSR = 1000/3, MSC = 50, MSE = 0, ICC = 80/83
  const auto shift = icc2k(matrix({{10, 15}, {20, 25}, {30, 35}, {40, 45}}));
  CHECK(std::abs(shift.value - 80.0 / 83) < 1e-9);
  CHECK(shift.value < 1.0);
  CHECK(shift.value > 0.9);

  // the classic 6 targets x 4 judges example, ICC(2,k) reported as 0.62
  const auto classic =
      icc2k(matrix({{9, 2, 5, 8}, {6, 1, 3, 2}, {8, 4, 6, 8}, {7, 1, 2, 6}, {10, 5, 6, 9}, {6, 2, 4, 7}}));
  CHECK(classic.value == doctest::Approx(0.62).epsilon(0.01));
}

TEST_CASE("icc2k is shift invariant and near zero without a meal effect") {
  const auto m = matrix({{3, 4, 2}, {8, 7, 9}, {5, 5, 6}, {1, 2, 1}, {6, 8, 7}});
  auto shifted = m;
  for (auto& row : shifted.values)
    for (auto& v : row) *v += 1234.5;
  CHECK(icc2k(shifted).value == doctest::Approx(icc2k(m).value).epsilon(1e-9));

  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0, 1);
  double sum = 0;
  constexpr int kTrials = 200;
  for (int t = 0; t < kTrials; ++t) {
    ExpertEstimateMatrix x;
    for (int j = 0; j < 5; ++j) x.rater_ids.push_back("r" + std::to_string(j));
    for (int i = 0; i < 20; ++i) {
      x.meal_ids.push_back("m" + std::to_string(i));
      std::vector<std::optional<double>> row;
      for (int j = 0; j < 5; ++j) row.emplace_back(50 + noise(rng));
      x.values.push_back(row);
    }
    sum += icc2k(x).value;
  }
  CHECK(std::abs(sum / kTrials) < 0.3);
}

TEST_CASE("icc2k listwise deletion and preconditions") {
  auto m = matrix({{1, 2}, {3, 4}, {5, 7}});
  m.values[1][0].reset();
  const auto r = icc2k(m);
  CHECK(r.meals_used == 2);
  CHECK(r.excluded_meals == std::vector<std::string>{"m1"});
  CHECK_THROWS_AS(icc2k(matrix({{1}, {2}, {3}})), Error);
  m.values[0][1].reset();
  CHECK_THROWS_AS(icc2k(m), Error);
}

TEST_CASE("csv readers and report") {
  std::istringstream crowd(
      "meal_id,worker_id,correct,image_items,text_items,completion_seconds,text_item_split_count\n"
      "m1,w1,2,3,3,90,3\n"
      "m1,w2,4,3,5,120,5\n"
      "m2,w1,1,1,1,59,1\n");
  const auto labels = read_crowd_csv(crowd);
  REQUIRE(labels.size() == 3);
  CHECK(labels[1].correct == 4);

  std::istringstream experts(
      "meal_id,rater_id,nutrient,value\n"
      "m1,a,energy_kcal,100\nm1,b,energy_kcal,110\n"
      "m2,a,energy_kcal,200\nm2,b,energy_kcal,190\n"
      "m3,a,energy_kcal,400\nm3,b,energy_kcal,\n"
      "m4,a,energy_kcal,0\nm4,b,energy_kcal,0\n");
  const auto matrices = read_expert_csv(experts);
  REQUIRE(matrices.count("energy_kcal"));
  CHECK(!matrices.at("energy_kcal").values[2][1]);

  std::istringstream system("meal_id,nutrient,value\nm1,energy_kcal,94.5\nm2,energy_kcal,195\nm4,energy_kcal,5\n");
  const auto sys = read_system_csv(system);

  EvalSummary summary;
  summary.crowd = summarize_crowd(labels);
  summary.nutrients = summarize_agreement(matrices, sys);
  CHECK(summary.crowd->qualified == 1);
  CHECK(summary.crowd->rejected.size() == 2);
  REQUIRE(summary.nutrients.size() == 1);
  const auto& n = summary.nutrients[0];
  REQUIRE(n.mape);
  CHECK(n.mape->used == 2);
  CHECK(n.mape->percent == doctest::Approx(5.0));  // (10.5/105 + 0/195) / 2
  CHECK(n.missing_system == std::vector<std::string>{"m3"});
  REQUIRE(n.icc);
  CHECK(n.icc->excluded_meals == std::vector<std::string>{"m3"});

  const auto j = to_json(summary);
  CHECK(j["nutrients"][0]["mape"]["excluded_zero_expert"] == nlohmann::json::array({"m4"}));
  CHECK(j["crowd"]["qualified"] == 1);
  const auto text = to_text(summary);
  CHECK(text.find("MAPE 5.000%") != std::string::npos);
  CHECK(text.find("excluded from ICC (missing cell): m3") != std::string::npos);

  std::istringstream bad("h\nm1,w1,x,3,3,90,3\n");
  CHECK_THROWS_AS(read_crowd_csv(bad), Error);
}
