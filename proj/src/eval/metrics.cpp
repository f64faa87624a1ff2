#include "mealsense/eval/metrics.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "mealsense/error.h"

namespace mealsense::eval {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size() && std::isfinite(v), ErrorCode::InvalidArgument,
          "line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

std::int64_t parse_count(const std::string& s, std::size_t line_no) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size() && v >= 0, ErrorCode::InvalidArgument,
          "line " + std::to_string(line_no) + ": bad count '" + s + "'");
  return v;
}

// Calls fn(fields, line_no) for every data row with exactly `columns` fields.
template <typename Fn>
void for_rows(std::istream& in, std::size_t columns, Fn fn) {
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = split_csv(line);
    require(fields.size() == columns, ErrorCode::InvalidArgument,
            "line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " fields");
    fn(fields, line_no);
  }
}

double harmonic(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

}  // namespace

std::optional<std::string> rejection_reason(const CrowdLabel& l) {
  if (l.correct < 0 || l.image_items < 0 || l.text_items < 0 || l.text_item_split_count < 0)
    return "negative count";
  if (l.image_items <= 0) return "no image items";
  if (l.text_items <= 0) return "no text items";
  if (l.correct > l.image_items) return "C > I";
  if (l.correct > l.text_items) return "C > T";
  if (!(l.completion_seconds >= kMinCompletionSeconds)) return "completed in under 60 s";
  if (l.text_items != l.text_item_split_count) return "T differs from the split item count";
  return std::nullopt;
}

std::vector<CrowdLabel> filter_crowd(std::span<const CrowdLabel> labels) {
  std::vector<CrowdLabel> out;
  for (const auto& l : labels)
    if (!rejection_reason(l)) out.push_back(l);
  return out;
}

Prf prf(const CrowdLabel& label) {
  const auto reason = rejection_reason(label);
  require(!reason, ErrorCode::InvalidArgument, "label is not qualified: " + reason.value_or(""));
  Prf m;
  m.precision = static_cast<double>(label.correct) / static_cast<double>(label.text_items);
  m.recall = static_cast<double>(label.correct) / static_cast<double>(label.image_items);
  m.f1 = harmonic(m.precision, m.recall);
  return m;
}

std::vector<MealPrf> meal_prf(std::span<const CrowdLabel> labels) {
  std::map<std::string, MealPrf> by_meal;
  for (const auto& l : labels) {
    if (rejection_reason(l)) continue;
    const auto m = prf(l);
    auto& acc = by_meal[l.meal_id];
    acc.meal_id = l.meal_id;
    ++acc.workers;
    acc.mean.precision += m.precision;
    acc.mean.recall += m.recall;
    acc.mean.f1 += m.f1;
  }
  std::vector<MealPrf> out;
  for (auto& [id, acc] : by_meal) {
    const double n = static_cast<double>(acc.workers);
    acc.mean.precision /= n;
    acc.mean.recall /= n;
    acc.mean.f1 /= n;
    out.push_back(acc);
  }
  return out;
}

Prf corpus_prf(std::span<const MealPrf> meals) {
  Prf m;
  if (meals.empty()) return m;
  for (const auto& meal : meals) {
    m.precision += meal.mean.precision;
    m.recall += meal.mean.recall;
    m.f1 += meal.mean.f1;
  }
  const double n = static_cast<double>(meals.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

MapeResult mape(std::span<const double> expert_avg, std::span<const double> system) {
  require(expert_avg.size() == system.size(), ErrorCode::InvalidArgument, "expert and system lengths differ");
  MapeResult r;
  double sum = 0;
  for (std::size_t i = 0; i < expert_avg.size(); ++i) {
    require(std::isfinite(expert_avg[i]) && std::isfinite(system[i]), ErrorCode::InvalidArgument,
            "non-finite value in MAPE input");
    if (expert_avg[i] == 0) {
      r.excluded.push_back(i);
      continue;
    }
    sum += std::abs((expert_avg[i] - system[i]) / expert_avg[i]);
    ++r.used;
  }
  require(r.used > 0, ErrorCode::InvalidArgument, "no meal with a non-zero expert average");
  r.percent = sum / static_cast<double>(r.used) * 100.0;
  return r;
}

std::vector<std::optional<double>> ExpertEstimateMatrix::meal_means() const {
  std::vector<std::optional<double>> out;
  for (const auto& row : values) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& v : row)
      if (v) {
        sum += *v;
        ++n;
      }
    out.push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt);
  }
  return out;
}

IccResult icc2k(const ExpertEstimateMatrix& matrix) {
  const std::size_t k = matrix.rater_ids.size();
  require(k >= 2, ErrorCode::InvalidArgument, "ICC needs at least 2 raters");
  require(matrix.values.size() == matrix.meal_ids.size(), ErrorCode::InvalidArgument, "matrix rows do not match meals");
  IccResult r;
  std::vector<const std::vector<std::optional<double>>*> rows;
  for (std::size_t i = 0; i < matrix.values.size(); ++i) {
    const auto& row = matrix.values[i];
    require(row.size() == k, ErrorCode::InvalidArgument, "matrix row width does not match raters");
    if (std::all_of(row.begin(), row.end(), [](const auto& v) { return v.has_value(); }))
      rows.push_back(&row);
    else
      r.excluded_meals.push_back(matrix.meal_ids[i]);
  }
  const std::size_t n = rows.size();
  require(n >= 2, ErrorCode::InvalidArgument, "ICC needs at least 2 complete meals");
  r.meals_used = n;

  double grand = 0;
  std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double x = *(*rows[i])[j];
      row_mean[i] += x;
      col_mean[j] += x;
      grand += x;
    }
  for (auto& m : row_mean) m /= static_cast<double>(k);
  for (auto& m : col_mean) m /= static_cast<double>(n);
  grand /= static_cast<double>(n * k);

  double ssr = 0, ssc = 0, sse = 0;
  for (std::size_t i = 0; i < n; ++i) ssr += (row_mean[i] - grand) * (row_mean[i] - grand);
  for (std::size_t j = 0; j < k; ++j) ssc += (col_mean[j] - grand) * (col_mean[j] - grand);
  ssr *= static_cast<double>(k);
  ssc *= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double e = *(*rows[i])[j] - row_mean[i] - col_mean[j] + grand;
      sse += e * e;
    }
  r.msr = ssr / static_cast<double>(n - 1);
  r.msc = ssc / static_cast<double>(k - 1);
  r.mse = sse / static_cast<double>((n - 1) * (k - 1));
  const double denom = r.msr + (r.msc - r.mse) / static_cast<double>(n);
  if (r.msr == 0 && r.msc == 0 && r.mse == 0)
    r.value = 1.0;
  else {
    require(denom != 0, ErrorCode::InvalidArgument, "ICC undefined: zero denominator");
    r.value = (r.msr - r.mse) / denom;
  }
  return r;
}

std::vector<CrowdLabel> read_crowd_csv(std::istream& in) {
  std::vector<CrowdLabel> out;
  for_rows(in, 7, [&](const std::vector<std::string>& f, std::size_t line) {
    CrowdLabel l;
    l.meal_id = f[0];
    l.worker_id = f[1];
    l.correct = parse_count(f[2], line);
    l.image_items = parse_count(f[3], line);
    l.text_items = parse_count(f[4], line);
    l.completion_seconds = parse_double(f[5], line);
    l.text_item_split_count = parse_count(f[6], line);
    require(!l.meal_id.empty() && !l.worker_id.empty(), ErrorCode::InvalidArgument,
            "line " + std::to_string(line) + ": empty id");
    out.push_back(std::move(l));
  });
  return out;
}

std::map<std::string, ExpertEstimateMatrix> read_expert_csv(std::istream& in) {
  struct Cell {
    std::string meal, rater;
    std::optional<double> value;
  };
  std::map<std::string, std::vector<Cell>> cells;
  for_rows(in, 4, [&](const std::vector<std::string>& f, std::size_t line) {
    std::optional<double> v;
    if (!f[3].empty()) v = parse_double(f[3], line);
    cells[f[2]].push_back({f[0], f[1], v});
  });
  std::map<std::string, ExpertEstimateMatrix> out;
  for (const auto& [nutrient, list] : cells) {
    ExpertEstimateMatrix m;
    std::set<std::string> meals, raters;
    for (const auto& c : list) {
      meals.insert(c.meal);
      raters.insert(c.rater);
    }
    m.meal_ids.assign(meals.begin(), meals.end());
    m.rater_ids.assign(raters.begin(), raters.end());
    m.values.assign(m.meal_ids.size(), std::vector<std::optional<double>>(m.rater_ids.size()));
    for (const auto& c : list) {
      const auto i = static_cast<std::size_t>(std::lower_bound(m.meal_ids.begin(), m.meal_ids.end(), c.meal) -
                                              m.meal_ids.begin());
      const auto j = static_cast<std::size_t>(std::lower_bound(m.rater_ids.begin(), m.rater_ids.end(), c.rater) -
                                              m.rater_ids.begin());
      require(!m.values[i][j], ErrorCode::InvalidArgument,
              "duplicate estimate for meal " + c.meal + ", rater " + c.rater + ", " + nutrient);
      m.values[i][j] = c.value;
    }
    out.emplace(nutrient, std::move(m));
  }
  return out;
}

std::map<std::string, std::map<std::string, double>> read_system_csv(std::istream& in) {
  std::map<std::string, std::map<std::string, double>> out;  // nutrient -> meal -> value
  for_rows(in, 3, [&](const std::vector<std::string>& f, std::size_t line) {
    require(out[f[1]].emplace(f[0], parse_double(f[2], line)).second, ErrorCode::InvalidArgument,
            "line " + std::to_string(line) + ": duplicate system value");
  });
  return out;
}

}  // namespace mealsense::eval
