#pragma once

// Brute-force reference implementations, written independently of the
// library code they are compared against. Nothing here calls into cbmrag
// except for plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, Mat[r][c]

inline double cosine(const Vec& u, const Vec& v) {
  double dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0 || vv == 0) return 0.0;
  const double c = dot / (std::sqrt(uu) * std::sqrt(vv));
  return c > 1 ? 1 : (c < -1 ? -1 : c);
}

// S[i][j] = cos(token i, concept j)
inline Mat similarity(const Mat& tokens, const Mat& concepts) {
  Mat s(tokens.size(), Vec(concepts.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (std::size_t j = 0; j < concepts.size(); ++j) s[i][j] = cosine(tokens[i], concepts[j]);
  return s;
}

inline Vec column_max(const Mat& s) {
  Vec out(s.at(0).size(), -INFINITY);
  for (const auto& row : s)
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = std::max(out[j], row[j]);
  return out;
}

inline Vec logits(const Mat& w, const Vec& b, const Vec& x) {
  Vec z(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    double acc = b[k];
    for (std::size_t j = 0; j < x.size(); ++j) acc += w[k][j] * x[j];
    z[k] = acc;
  }
  return z;
}

inline Vec softmax(const Vec& z) {
  const double m = *std::max_element(z.begin(), z.end());
  Vec p(z.size());
  double total = 0;
  for (std::size_t k = 0; k < z.size(); ++k) total += (p[k] = std::exp(z[k] - m));
  for (auto& x : p) x /= total;
  return p;
}

inline std::size_t first_argmax(const Vec& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Column reshaped row-major and min-max scaled; constant column -> zeros.
inline Vec saliency(const Vec& column) {
  const double lo = *std::min_element(column.begin(), column.end());
  const double hi = *std::max_element(column.begin(), column.end());
  Vec out(column.size(), 0.0);
  if (hi == lo) return out;
  for (std::size_t i = 0; i < column.size(); ++i) out[i] = (column[i] - lo) / (hi - lo);
  return out;
}

// Half-pixel-centre bilinear upsampling of a gh x gw grid to W x H, 8-bit.
inline std::vector<std::uint8_t> bilinear(const Vec& grid, std::size_t gh, std::size_t gw,
                                          std::size_t width, std::size_t height) {
  std::vector<std::uint8_t> out;
  out.reserve(width * height);
  auto g = [&](std::size_t y, std::size_t x) { return grid[y * gw + x]; };
  for (std::size_t py = 0; py < height; ++py) {
    double fy = (py + 0.5) * static_cast<double>(gh) / static_cast<double>(height) - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(gh - 1));
    const auto y0 = static_cast<std::size_t>(std::floor(fy));
    const auto y1 = std::min(y0 + 1, gh - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t px = 0; px < width; ++px) {
      double fx = (px + 0.5) * static_cast<double>(gw) / static_cast<double>(width) - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(gw - 1));
      const auto x0 = static_cast<std::size_t>(std::floor(fx));
      const auto x1 = std::min(x0 + 1, gw - 1);
      const double tx = fx - static_cast<double>(x0);
      const double v = g(y0, x0) * (1 - tx) * (1 - ty) + g(y0, x1) * tx * (1 - ty) +
                       g(y1, x0) * (1 - tx) * ty + g(y1, x1) * tx * ty;
      const double scaled = std::round(255.0 * std::clamp(v, 0.0, 1.0));
      out.push_back(static_cast<std::uint8_t>(scaled));
    }
  }
  return out;
}

// Mean softmax cross-entropy + (l2/2)||W||^2 evaluated from scratch.
inline double cross_entropy(const Mat& w, const Vec& b, const Mat& xs,
                            const std::vector<std::size_t>& ys, double l2) {
  double loss = 0;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    const auto p = softmax(logits(w, b, xs[n]));
    loss -= std::log(p[ys[n]]);
  }
  loss /= static_cast<double>(xs.size());
  double sq = 0;
  for (const auto& row : w)
    for (double x : row) sq += x * x;
  return loss + 0.5 * l2 * sq;
}

struct ScoredChunk {
  std::string doc_id;
  std::size_t chunk_index;
  double score;
};

// Full sort by score desc, then (doc_id, chunk_index) asc; first k entries.
inline std::vector<ScoredChunk> top_k(std::vector<ScoredChunk> all, std::size_t k) {
  std::sort(all.begin(), all.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.doc_id, a.chunk_index) < std::tie(b.doc_id, b.chunk_index);
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// Indices ordered by |v| desc, ties by index asc (insertion sort).
inline std::vector<std::size_t> order_by_abs(const Vec& v) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t pos = idx.size();
    while (pos > 0 && std::abs(v[idx[pos - 1]]) < std::abs(v[i])) --pos;
    idx.insert(idx.begin() + static_cast<std::ptrdiff_t>(pos), i);
  }
  return idx;
}

inline Vec random_vec(std::mt19937_64& rng, std::size_t n, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vec v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline Mat random_mat(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1,
                      double hi = 1) {
  Mat m(r);
  for (auto& row : m) row = random_vec(rng, c, lo, hi);
  return m;
}

}  // namespace oracle
