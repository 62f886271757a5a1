#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "igt/errors.hpp"

namespace igt {

/// Index of the largest value; the lowest index wins ties.
template <typename T>
std::size_t argmax(std::span<const T> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  if (preds.empty() || preds.size() != labels.size())
    throw ContractError("accuracy: need equal, nonzero lengths (got " + std::to_string(preds.size()) + " and " +
                        std::to_string(labels.size()) + ")");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

/// Mann-Whitney AUROC: P(score+ > score-) + 0.5 P(tie), via midranks.
inline double auroc_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ContractError("auroc: labels must be 0 or 1");
    n_pos += l == 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUROC undefined: only one class present in labels");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]] == 1) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

struct MacroAuroc {
  double value = 0;
  std::vector<std::optional<double>> per_class;
  std::vector<std::size_t> skipped;
};

/// Macro one-vs-rest AUROC over rows of class probabilities. For two classes
/// this is the binary AUROC of the class-1 column.
inline MacroAuroc auroc_macro(const std::vector<std::vector<double>>& probs, std::span<const std::size_t> labels) {
  if (probs.size() != labels.size() || probs.empty())
    throw ContractError("auroc_macro: need one probability row per label");
  const std::size_t c = probs.front().size();
  MacroAuroc out;
  out.per_class.assign(c, std::nullopt);
  std::vector<double> col(probs.size());
  std::vector<int> bin(probs.size());
  double total = 0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i].size() != c) throw ContractError("auroc_macro: ragged probability rows");
      col[i] = probs[i][k];
      bin[i] = labels[i] == k ? 1 : 0;
    }
    try {
      out.per_class[k] = auroc_binary(col, bin);
      total += *out.per_class[k];
      ++used;
    } catch (const UndefinedMetricError&) {
      out.skipped.push_back(k);
    }
  }
  if (used == 0) throw UndefinedMetricError("AUROC undefined: no class has both positive and negative samples");
  out.value = (c == 2 && out.per_class[1]) ? *out.per_class[1] : total / static_cast<double>(used);
  return out;
}

struct EvalReport {
  double accuracy = 0;
  std::optional<double> auroc;
  std::string auroc_error;  // set when auroc is undefined
  std::vector<std::optional<double>> per_class_auroc;
  std::vector<std::size_t> skipped_classes;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][pred]
  std::size_t n_samples = 0;

  bool operator==(const EvalReport&) const = default;
};

/// Accuracy, macro AUROC and confusion matrix from per-sample class probabilities.
inline EvalReport make_report(const std::vector<std::vector<double>>& probs, std::span<const std::size_t> labels,
                              std::size_t n_classes) {
  if (probs.empty()) throw ContractError("evaluation on an empty split");
  EvalReport r;
  r.n_samples = probs.size();
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  std::vector<std::size_t> preds(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    preds[i] = argmax<double>(probs[i]);
    ++r.confusion.at(labels[i]).at(preds[i]);
  }
  r.accuracy = accuracy(preds, labels);
  try {
    const auto m = auroc_macro(probs, labels);
    r.auroc = m.value;
    r.per_class_auroc = m.per_class;
    r.skipped_classes = m.skipped;
  } catch (const UndefinedMetricError& e) {
    r.auroc_error = e.what();
    r.per_class_auroc.assign(n_classes, std::nullopt);
  }
  return r;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["auroc"] = r.auroc ? nlohmann::ordered_json(*r.auroc) : nlohmann::ordered_json(nullptr);
  if (!r.auroc_error.empty()) j["auroc_error"] = r.auroc_error;
  auto pc = nlohmann::ordered_json::array();
  for (const auto& v : r.per_class_auroc) pc.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr));
  j["per_class_auroc"] = pc;
  j["skipped_classes"] = r.skipped_classes;
  j["confusion"] = r.confusion;
  j["n_samples"] = r.n_samples;
  return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.accuracy = j.at("accuracy").get<double>();
  if (!j.at("auroc").is_null()) r.auroc = j.at("auroc").get<double>();
  r.auroc_error = j.value("auroc_error", "");
  for (const auto& v : j.at("per_class_auroc"))
    r.per_class_auroc.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  r.skipped_classes = j.at("skipped_classes").get<std::vector<std::size_t>>();
  r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
  r.n_samples = j.at("n_samples").get<std::size_t>();
  return r;
}

}  // namespace igt
