// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <vector>

#include "zsid/errors.hpp"

namespace zsid {

MicroScores micro_scores(std::span<const std::size_t> pred, std::span<const std::size_t> gold,
                         std::span<const std::size_t> subset) {
  if (pred.size() != gold.size()) throw DimensionError("micro_scores: predictions and golds differ in length");
  if (pred.empty()) throw DataError("micro_scores: empty evaluation set");
  std::size_t max_label = 0;
  for (std::size_t s : subset) max_label = std::max(max_label, s + 1);
  for (std::size_t i = 0; i < pred.size(); ++i) max_label = std::max({max_label, pred[i] + 1, gold[i] + 1});
  std::vector<bool> in(max_label, false);
  for (std::size_t s : subset) in[s] = true;

  std::size_t tp = 0, fn = 0, fp = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool hit = pred[i] == gold[i];
    if (in[gold[i]]) (hit ? tp : fn)++;
    if (!hit && in[pred[i]]) ++fp;
  }
  const std::size_t support = tp + fn;
  if (support == 0) throw DataError("micro_scores: no gold labels in the requested group");
  MicroScores m;
  m.support = support;
  m.recall = static_cast<double>(tp) / static_cast<double>(support);
  m.accuracy = m.recall;
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

namespace {

std::optional<MicroScores> group(std::span<const std::size_t> pred, std::span<const std::size_t> gold,
                                 std::size_t begin, std::size_t end) {
  std::vector<std::size_t> subset(end - begin);
  std::iota(subset.begin(), subset.end(), begin);
  const bool any = std::any_of(gold.begin(), gold.end(), [&](std::size_t g) { return g >= begin && g < end; });
  if (!any) return std::nullopt;
  return micro_scores(pred, gold, subset);
}

void check_range(std::span<const std::size_t> pred, std::span<const std::size_t> gold, const LabelSet& labels) {
  if (pred.size() != gold.size()) throw DimensionError("report: predictions and golds differ in length");
  if (pred.empty()) throw DataError("report: empty evaluation set");
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] >= labels.size() || gold[i] >= labels.size()) throw DataError("report: label index out of range");
}

}  // namespace

MetricsReport grouped_report(std::span<const std::size_t> pred, std::span<const std::size_t> gold,
                             const LabelSet& labels) {
  check_range(pred, gold, labels);
  const std::size_t I = labels.seen_count(), K = labels.size();
  return {group(pred, gold, 0, I), group(pred, gold, I, K), group(pred, gold, 0, K)};
}

MetricsReport unseen_report(std::span<const std::size_t> pred, std::span<const std::size_t> gold,
                            const LabelSet& labels) {
  check_range(pred, gold, labels);
  return {std::nullopt, group(pred, gold, labels.seen_count(), labels.size()), std::nullopt};
}

std::string report_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "group,accuracy,precision,recall,f1,support\n";
  auto line = [&](const char* name, const std::optional<MicroScores>& m) {
    if (!m) {
      os << name << ",NA,NA,NA,NA,0\n";
      return;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%.2f,%.2f,%.2f,%.2f,%zu\n", name, 100 * m->accuracy, 100 * m->precision,
                  100 * m->recall, 100 * m->f1, m->support);
    os << buf;
  };
  const bool zsid_only = !r.seen && !r.overall && r.unseen;
  if (!zsid_only) line("seen", r.seen);
  line("unseen", r.unseen);
  if (!zsid_only) line("overall", r.overall);
  os << "# micro average over gold-label groups; precision is 0 for a group that receives no predictions\n";
  return os.str();
}

}  // namespace zsid
