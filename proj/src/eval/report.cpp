#include "mealsense/eval/report.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "mealsense/error.h"

namespace mealsense::eval {

namespace {

nlohmann::json prf_json(double p, double r, double f1) {
  nlohmann::json j = nlohmann::json::object();
  j["precision"] = p;
  j["recall"] = r;
  j["f1"] = f1;
  return j;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

CrowdSummary summarize_crowd(const std::vector<CrowdLabel>& labels) {
  CrowdSummary s;
  s.total = labels.size();
  for (const auto& l : labels)
    if (const auto reason = rejection_reason(l)) s.rejected.push_back({l.meal_id, l.worker_id, *reason});
  s.qualified = s.total - s.rejected.size();
  s.meals = meal_prf(labels);
  s.corpus = corpus_prf(s.meals);
  return s;
}

std::vector<NutrientAgreement> summarize_agreement(
    const std::map<std::string, ExpertEstimateMatrix>& experts,
    const std::map<std::string, std::map<std::string, double>>& system) {
  std::vector<NutrientAgreement> out;
  for (const auto& [nutrient, matrix] : experts) {
    NutrientAgreement a;
    a.nutrient = nutrient;
    const auto means = matrix.meal_means();
    const auto sys = system.find(nutrient);
    std::vector<double> e, s;
    for (std::size_t i = 0; i < matrix.meal_ids.size(); ++i) {
      if (!means[i]) continue;
      const auto& id = matrix.meal_ids[i];
      const auto hit = sys == system.end() ? nullptr : [&]() -> const double* {
        const auto it = sys->second.find(id);
        return it == sys->second.end() ? nullptr : &it->second;
      }();
      if (!hit) {
        a.missing_system.push_back(id);
        continue;
      }
      e.push_back(*means[i]);
      s.push_back(*hit);
      a.mape_meals.push_back(id);
    }
    if (!e.empty() && std::any_of(e.begin(), e.end(), [](double v) { return v != 0; })) a.mape = mape(e, s);
    try {
      a.icc = icc2k(matrix);
    } catch (const Error& err) {
      a.icc_error = err.what();
    }
    out.push_back(std::move(a));
  }
  return out;
}

nlohmann::json to_json(const EvalSummary& summary) {
  nlohmann::json j = nlohmann::json::object();
  if (summary.crowd) {
    const auto& c = *summary.crowd;
    nlohmann::json crowd = nlohmann::json::object();
    crowd["total"] = c.total;
    crowd["qualified"] = c.qualified;
    nlohmann::json rejected = nlohmann::json::array();
    for (const auto& r : c.rejected) {
      nlohmann::json x = nlohmann::json::object();
      x["meal_id"] = r.meal_id;
      x["worker_id"] = r.worker_id;
      x["reason"] = r.reason;
      rejected.push_back(std::move(x));
    }
    crowd["rejected"] = std::move(rejected);
    nlohmann::json meals = nlohmann::json::array();
    for (const auto& m : c.meals) {
      auto x = prf_json(m.mean.precision, m.mean.recall, m.mean.f1);
      x["meal_id"] = m.meal_id;
      x["workers"] = m.workers;
      meals.push_back(std::move(x));
    }
    crowd["meals"] = std::move(meals);
    crowd["corpus"] = prf_json(c.corpus.precision, c.corpus.recall, c.corpus.f1);
    j["crowd"] = std::move(crowd);
  }
  nlohmann::json nutrients = nlohmann::json::array();
  for (const auto& a : summary.nutrients) {
    nlohmann::json x = nlohmann::json::object();
    x["nutrient"] = a.nutrient;
    if (a.mape) {
      nlohmann::json m = nlohmann::json::object();
      m["percent"] = a.mape->percent;
      m["meals_used"] = a.mape->used;
      nlohmann::json excluded = nlohmann::json::array();
      for (auto i : a.mape->excluded) excluded.push_back(a.mape_meals.at(i));
      m["excluded_zero_expert"] = std::move(excluded);
      x["mape"] = std::move(m);
    }
    x["missing_system"] = a.missing_system;
    if (a.icc) {
      nlohmann::json icc = nlohmann::json::object();
      icc["value"] = a.icc->value;
      icc["meals_used"] = a.icc->meals_used;
      icc["excluded_meals"] = a.icc->excluded_meals;
      icc["msr"] = a.icc->msr;
      icc["msc"] = a.icc->msc;
      icc["mse"] = a.icc->mse;
      x["icc2k"] = std::move(icc);
    }
    if (a.icc_error) x["icc2k_error"] = *a.icc_error;
    nutrients.push_back(std::move(x));
  }
  j["nutrients"] = std::move(nutrients);
  if (summary.detection) {
    const auto& d = *summary.detection;
    nlohmann::json det = nlohmann::json::object();
    det["macro"] = prf_json(d.macro.precision, d.macro.recall, d.macro.f1);
    nlohmann::json users = nlohmann::json::object();
    for (const auto& [user, p] : d.per_user) users[user] = prf_json(p.precision, p.recall, p.f1);
    det["per_user"] = std::move(users);
    j["detection"] = std::move(det);
  }
  return j;
}

std::string to_text(const EvalSummary& summary) {
  std::ostringstream os;
  if (summary.detection) {
    const auto& d = *summary.detection;
    os << "DETECTION (leave-one-user-out)\n";
    for (const auto& [user, p] : d.per_user)
      os << "  " << user << "  P " << fixed(p.precision) << "  R " << fixed(p.recall) << "  F1 " << fixed(p.f1)
         << '\n';
    os << "  macro  P " << fixed(d.macro.precision) << "  R " << fixed(d.macro.recall) << "  F1 "
       << fixed(d.macro.f1) << '\n';
  }
  if (summary.crowd) {
    const auto& c = *summary.crowd;
    os << "CROWD LABELS\n";
    os << "  qualified " << c.qualified << " of " << c.total << '\n';
    for (const auto& r : c.rejected) os << "  rejected " << r.meal_id << '/' << r.worker_id << ": " << r.reason << '\n';
    for (const auto& m : c.meals)
      os << "  meal " << m.meal_id << " (" << m.workers << " workers)  P " << fixed(m.mean.precision) << "  R "
         << fixed(m.mean.recall) << "  F1 " << fixed(m.mean.f1) << '\n';
    os << "  corpus  P " << fixed(c.corpus.precision) << "  R " << fixed(c.corpus.recall) << "  F1 "
       << fixed(c.corpus.f1) << '\n';
  }
  if (!summary.nutrients.empty()) {
    os << "NUTRIENT AGREEMENT\n";
    for (const auto& a : summary.nutrients) {
      os << "  " << a.nutrient;
      if (a.mape)
        os << "  MAPE " << fixed(a.mape->percent, 3) << "% over " << a.mape->used << " meals";
      else
        os << "  MAPE n/a";
      if (a.icc)
        os << "  ICC(2,k) " << fixed(a.icc->value) << " over " << a.icc->meals_used << " meals";
      else
        os << "  ICC(2,k) n/a";
      os << '\n';
      if (a.mape)
        for (auto i : a.mape->excluded) os << "    excluded from MAPE (zero expert mean): " << a.mape_meals.at(i) << '\n';
      for (const auto& id : a.missing_system) os << "    no system value: " << id << '\n';
      if (a.icc)
        for (const auto& id : a.icc->excluded_meals) os << "    excluded from ICC (missing cell): " << id << '\n';
      if (a.icc_error) os << "    ICC: " << *a.icc_error << '\n';
    }
  }
  return os.str();
}

}  // namespace mealsense::eval
