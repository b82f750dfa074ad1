// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "zsid/errors.hpp"

namespace zsid {

IntentRepresentations average_representations(const Tensor& reps, std::span<const std::size_t> labels,
                                              const LabelSet& label_set) {
  if (reps.rank() != 2 || reps.rows() != labels.size())
    throw DimensionError("average_representations: " + reps.shape_string() + " for " +
                         std::to_string(labels.size()) + " labels");
  const std::size_t K = label_set.size();
  const std::size_t D = reps.cols();
  IntentRepresentations out{Tensor({K, D}), std::vector<std::size_t>(K, 0)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= K) throw DataError("average_representations: label index out of range");
    auto dst = out.vectors.row(labels[i]);
    auto src = reps.row(i);
    for (std::size_t d = 0; d < D; ++d) dst[d] += src[d];
    ++out.counts[labels[i]];
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (out.counts[k] == 0)
      throw DataError("intent '" + label_set.name(k) + "' has no training items to build its representation");
    const double n = static_cast<double>(out.counts[k]);
    for (double& v : out.vectors.row(k)) v /= n;
  }
  return out;
}

std::string_view to_string(SimilarityKernel k) { return k == SimilarityKernel::exp_neg ? "exp-neg" : "neg-distance"; }

SimilarityKernel similarity_kernel_from_string(std::string_view s) {
  if (s == "exp-neg") return SimilarityKernel::exp_neg;
  if (s == "neg-distance") return SimilarityKernel::neg_distance;
  throw ConfigError("unknown similarity kernel '" + std::string(s) + "' (expected exp-neg or neg-distance)");
}

std::string_view to_string(SimilarityMode m) { return m == SimilarityMode::zsl ? "zsl" : "gzsl"; }

SimilarityMode similarity_mode_from_string(std::string_view s) {
  if (s == "zsl") return SimilarityMode::zsl;
  if (s == "gzsl") return SimilarityMode::gzsl;
  throw ConfigError("unknown similarity mode '" + std::string(s) + "' (expected zsl or gzsl)");
}

void validate(const SimilarityConfig& cfg) {
  if (!(cfg.sigma > 0.0)) throw ConfigError("similarity sigma must be > 0");
  if (cfg.tau < 0.0) throw ConfigError("similarity tau must be > 0 (or 0 for the automatic choice)");
  if (cfg.kernel == SimilarityKernel::neg_distance && cfg.row_normalize)
    throw ConfigError("neg-distance similarities cannot be row-normalized; set similarity_row_normalize=false");
}

double intent_distance(std::span<const double> a, std::span<const double> b, double sigma) {
  if (a.size() != b.size()) throw DimensionError("intent_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / (sigma * sigma);
}

Tensor distance_matrix(const Tensor& reps, double sigma, kernels::Exec exec) {
  Tensor d = kernels::pairwise_sq_dist(exec, reps, reps);
  const double s2 = sigma * sigma;
  for (double& v : d.data()) v /= s2;
  return d;
}

double resolved_tau(const Tensor& distances, const SimilarityConfig& cfg) {
  if (cfg.tau > 0.0) return cfg.tau;
  const std::size_t K = distances.rows();
  if (K < 2) return 1.0;
  double s = 0.0;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j)
      if (i != j) s += distances.at(i, j);
  const double mean = s / static_cast<double>(K * (K - 1));
  return mean > 0.0 ? mean : 1.0;
}

namespace {

Tensor kernelize(const Tensor& dist, std::size_t seen, SimilarityMode mode, const SimilarityConfig& cfg) {
  validate(cfg);
  const std::size_t K = dist.rows();
  if (seen > K) throw DimensionError("similarity: more seen intents than intents");
  const double tau = resolved_tau(dist, cfg);
  const std::size_t first = mode == SimilarityMode::zsl ? seen : 0;
  const std::size_t cols = K - first;
  if (cols == 0) throw ConfigError("zsl similarity matrix needs at least one unseen intent");
  Tensor out({K, cols});
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = dist.at(i, first + j);
      out.at(i, j) = cfg.kernel == SimilarityKernel::exp_neg ? std::exp(-d / tau) : -d;
    }
    if (cfg.row_normalize) {
      double s = 0.0;
      for (double v : out.row(i)) s += v;
      if (s > 0.0)
        for (double& v : out.row(i)) v /= s;
    }
  }
  return out;
}

}  // namespace

Tensor build_similarity_matrix(const Tensor& reps, std::size_t seen, SimilarityMode mode, const SimilarityConfig& cfg) {
  validate(cfg);
  return kernelize(distance_matrix(reps, cfg.sigma), seen, mode, cfg);
}

Tensor label_embedding_vectors(const LabelMetadata& meta, const EmbeddingTable& table) {
  const std::size_t K = meta.labels.size();
  Tensor out({K, table.dim()});
  for (std::size_t k = 0; k < K; ++k) {
    const auto tokens = meta.name_tokens(k);
    for (const auto& tok : tokens) {
      const auto v = table.lookup(tok);
      for (std::size_t d = 0; d < v.size(); ++d) out.at(k, d) += v[d];
    }
    for (double& v : out.row(k)) v /= static_cast<double>(tokens.size());
  }
  return out;
}

Tensor embedding_similarity_baseline(const LabelMetadata& meta, const EmbeddingTable& table, SimilarityMode mode,
                                     const SimilarityConfig& cfg) {
  return build_similarity_matrix(label_embedding_vectors(meta, table), meta.labels.seen_count(), mode, cfg);
}

std::vector<std::string> similarity_columns(const LabelSet& labels, SimilarityMode mode) {
  return mode == SimilarityMode::zsl ? labels.unseen() : labels.all();
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void check_labels(const Tensor& m, const std::vector<std::string>& rows, const std::vector<std::string>& cols) {
  if (m.rank() != 2 || m.rows() != rows.size() || m.cols() != cols.size())
    throw DimensionError("similarity export: matrix " + m.shape_string() + " vs " + std::to_string(rows.size()) +
                         "×" + std::to_string(cols.size()) + " labels");
}

}  // namespace

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string similarity_csv(const Tensor& m, const std::vector<std::string>& rows, const std::vector<std::string>& cols) {
  check_labels(m, rows, cols);
  std::ostringstream os;
  os << "label";
  for (const auto& c : cols) os << ',' << csv_cell(c);
  os << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << csv_cell(rows[i]);
    for (std::size_t j = 0; j < cols.size(); ++j) os << ',' << fmt(m.at(i, j));
    os << '\n';
  }
  return os.str();
}

std::string similarity_svg(const Tensor& m, const std::vector<std::string>& rows, const std::vector<std::string>& cols) {
  check_labels(m, rows, cols);
  constexpr int cell = 56, left = 160, top = 120;
  const auto [lo_it, hi_it] = std::minmax_element(m.data().begin(), m.data().end());
  const double lo = *lo_it, hi = *hi_it;
  const int width = left + cell * static_cast<int>(cols.size()) + 10;
  const int height = top + cell * static_cast<int>(rows.size()) + 10;

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const int x = left + cell * static_cast<int>(j) + cell / 2;
    os << "  <text x=\"" << x << "\" y=\"" << top - 6 << "\" transform=\"rotate(-45 " << x << ' ' << top - 6
       << ")\">" << xml_escape(cols[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int y = top + cell * static_cast<int>(i);
    os << "  <text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"end\">"
       << xml_escape(rows[i]) << "</text>\n";
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double v = m.at(i, j);
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
      const int r = static_cast<int>(std::lround(255 - 222 * t));
      const int g = static_cast<int>(std::lround(255 - 153 * t));
      const int b = static_cast<int>(std::lround(255 - 75 * t));
      const int x = left + cell * static_cast<int>(j);
      char value[32];
      std::snprintf(value, sizeof value, "%.3f", v);
      os << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
         << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\"/>\n"
         << "  <text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
         << (t > 0.6 ? "white" : "black") << "\">" << value << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace zsid
