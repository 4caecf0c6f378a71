/*
 * Copyright 2026 The cpshap Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Leaf-wise gradient boosting on pre-binned features. Squared loss fits
// residuals directly; the pinball loss grows the tree on the sign gradient and
// then sets each leaf to the empirical quantile of the residuals it holds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "cpshap/errors.hpp"
#include "cpshap/regressors.hpp"

namespace cpshap::detail {
namespace {

struct BinnedFeatures {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bins;         // column-major
  std::vector<std::vector<double>> edges;  // edges[f][b]: upper edge of bin b
  std::vector<std::size_t> offset;         // histogram offset per feature
  std::size_t total_bins = 0;

  std::uint8_t at(std::size_t f, std::size_t row) const {
    return bins[f * rows + row];
  }
};

BinnedFeatures bin_features(const Matrix& x, std::size_t max_bins) {
  BinnedFeatures out;
  out.rows = x.rows();
  out.cols = x.cols();
  out.bins.resize(out.rows * out.cols);
  out.edges.resize(out.cols);
  out.offset.resize(out.cols);
  std::vector<double> sorted(out.rows);
  for (std::size_t f = 0; f < out.cols; ++f) {
    for (std::size_t i = 0; i < out.rows; ++i) sorted[i] = x(i, f);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> unique(sorted);
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    auto& edges = out.edges[f];
    if (unique.size() <= max_bins) {
      edges = std::move(unique);
    } else {
      for (std::size_t b = 0; b < max_bins; ++b) {
        const std::size_t idx = ((b + 1) * out.rows + max_bins - 1) / max_bins - 1;
        edges.push_back(sorted[std::min(idx, out.rows - 1)]);
      }
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
      if (edges.back() < sorted.back()) edges.back() = sorted.back();
    }
    out.offset[f] = out.total_bins;
    out.total_bins += edges.size();
    for (std::size_t i = 0; i < out.rows; ++i) {
      const auto it = std::lower_bound(edges.begin(), edges.end(), x(i, f));
      out.bins[f * out.rows + i] =
          static_cast<std::uint8_t>(std::min<std::ptrdiff_t>(
              it - edges.begin(), static_cast<std::ptrdiff_t>(edges.size()) - 1));
    }
  }
  return out;
}

struct Histogram {
  std::vector<double> grad;
  std::vector<std::uint32_t> count;
};

struct Split {
  double gain = 0.0;
  int feature = -1;
  int bin = -1;
};

struct Leaf {
  std::size_t begin;
  std::size_t end;
  int node;
  Histogram hist;
  Split best;
};

class TreeGrower {
 public:
  TreeGrower(const BinnedFeatures& binned, const TreeParams& params)
      : binned_(binned),
        params_(params),
        min_rows_(std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(
                   params.min_node_fraction * static_cast<double>(binned.rows) - 1e-9)))),
        index_(binned.rows),
        scratch_(binned.rows) {}

  std::size_t min_rows() const noexcept { return min_rows_; }

  // Grows one tree on `grad`; leaves() then holds the final row ranges.
  RegressionTree grow(const std::vector<double>& grad) {
    std::iota(index_.begin(), index_.end(), 0u);
    double sum_sq = 0.0;
    for (double g : grad) sum_sq += g * g;
    min_gain_ = 1e-12 * sum_sq;

    RegressionTree tree;
    tree.nodes.push_back(TreeNode{});
    tree.nodes[0].rows = binned_.rows;
    leaves_.clear();
    Leaf root{0, binned_.rows, 0, build_histogram(0, binned_.rows, grad), {}};
    root.best = best_split(root);
    leaves_.push_back(std::move(root));

    while (leaves_.size() < params_.max_leaves) {
      std::size_t pick = leaves_.size();
      for (std::size_t l = 0; l < leaves_.size(); ++l) {
        if (leaves_[l].best.feature < 0) continue;
        if (pick == leaves_.size() || leaves_[l].best.gain > leaves_[pick].best.gain) {
          pick = l;
        }
      }
      if (pick == leaves_.size()) break;
      split_leaf(pick, tree, grad);
    }
    return tree;
  }

  const std::vector<Leaf>& leaves() const noexcept { return leaves_; }
  std::span<const std::uint32_t> rows_of(const Leaf& leaf) const {
    return {index_.data() + leaf.begin, leaf.end - leaf.begin};
  }

 private:
  Histogram build_histogram(std::size_t begin, std::size_t end,
                            const std::vector<double>& grad) const {
    Histogram h{std::vector<double>(binned_.total_bins, 0.0),
                std::vector<std::uint32_t>(binned_.total_bins, 0)};
    for (std::size_t f = 0; f < binned_.cols; ++f) {
      const std::uint8_t* col = binned_.bins.data() + f * binned_.rows;
      double* g = h.grad.data() + binned_.offset[f];
      std::uint32_t* c = h.count.data() + binned_.offset[f];
      for (std::size_t k = begin; k < end; ++k) {
        const std::uint32_t row = index_[k];
        g[col[row]] += grad[row];
        ++c[col[row]];
      }
    }
    return h;
  }

  Split best_split(const Leaf& leaf) const {
    Split best;
    const std::size_t n = leaf.end - leaf.begin;
    if (n < 2 * min_rows_) return best;
    double total = 0.0;
    {
      const std::size_t nb = binned_.edges[0].size();
      for (std::size_t b = 0; b < nb; ++b) total += leaf.hist.grad[binned_.offset[0] + b];
    }
    const double parent = total * total / static_cast<double>(n);
    for (std::size_t f = 0; f < binned_.cols; ++f) {
      const std::size_t nb = binned_.edges[f].size();
      const double* g = leaf.hist.grad.data() + binned_.offset[f];
      const std::uint32_t* c = leaf.hist.count.data() + binned_.offset[f];
      double left_g = 0.0;
      std::size_t left_n = 0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        left_g += g[b];
        left_n += c[b];
        if (left_n < min_rows_) continue;
        const std::size_t right_n = n - left_n;
        if (right_n < min_rows_) break;
        const double right_g = total - left_g;
        const double gain = left_g * left_g / static_cast<double>(left_n) +
                            right_g * right_g / static_cast<double>(right_n) - parent;
        if (gain > min_gain_ && gain > best.gain) {
          best = Split{gain, static_cast<int>(f), static_cast<int>(b)};
        }
      }
    }
    return best;
  }

  void split_leaf(std::size_t pick, RegressionTree& tree,
                  const std::vector<double>& grad) {
    Leaf parent = std::move(leaves_[pick]);
    const auto f = static_cast<std::size_t>(parent.best.feature);
    const auto bin = static_cast<std::uint8_t>(parent.best.bin);

    // Stable partition of the parent's rows into left then right.
    std::size_t left_end = parent.begin;
    std::size_t right_count = 0;
    for (std::size_t k = parent.begin; k < parent.end; ++k) {
      const std::uint32_t row = index_[k];
      if (binned_.at(f, row) <= bin) {
        index_[left_end++] = row;
      } else {
        scratch_[right_count++] = row;
      }
    }
    std::copy_n(scratch_.begin(), right_count, index_.begin() + static_cast<std::ptrdiff_t>(left_end));

    const int left_node = static_cast<int>(tree.nodes.size());
    const int right_node = left_node + 1;
    TreeNode& node = tree.nodes[static_cast<std::size_t>(parent.node)];
    node.feature = static_cast<int>(f);
    node.threshold = binned_.edges[f][bin];
    node.left = left_node;
    node.right = right_node;
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, left_end - parent.begin});
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, parent.end - left_end});

    Leaf left{parent.begin, left_end, left_node, {}, {}};
    Leaf right{left_end, parent.end, right_node, {}, {}};
    Leaf& small = (left.end - left.begin) <= (right.end - right.begin) ? left : right;
    Leaf& large = (&small == &left) ? right : left;
    small.hist = build_histogram(small.begin, small.end, grad);
    large.hist = std::move(parent.hist);
    for (std::size_t b = 0; b < binned_.total_bins; ++b) {
      large.hist.grad[b] -= small.hist.grad[b];
      large.hist.count[b] -= small.hist.count[b];
    }
    left.best = best_split(left);
    right.best = best_split(right);
    leaves_[pick] = std::move(left);
    leaves_.push_back(std::move(right));
  }

  const BinnedFeatures& binned_;
  const TreeParams& params_;
  std::size_t min_rows_;
  double min_gain_ = 0.0;
  std::vector<std::uint32_t> index_;
  std::vector<std::uint32_t> scratch_;
  std::vector<Leaf> leaves_;
};

}  // namespace

std::shared_ptr<const TreeEnsemblePredictor> fit_tree_ensemble(
    const TreeParams& params, const Matrix& features,
    std::span<const double> target, std::optional<double> level) {
  const std::size_t n = features.rows();
  if (n == 0) throw EmptyDataError("tree ensemble needs training rows");
  const BinnedFeatures binned = bin_features(features, params.max_bins);
  TreeGrower grower(binned, params);

  const double base = level ? empirical_quantile(target, *level) : mean(target);
  std::vector<double> fitted(n, base);
  std::vector<double> grad(n);
  std::vector<double> residual_buf;
  std::vector<RegressionTree> trees;
  trees.reserve(params.trees);

  for (std::size_t t = 0; t < params.trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double r = target[i] - fitted[i];
      grad[i] = level ? (r > 0.0 ? *level : *level - 1.0) : r;
    }
    RegressionTree tree = grower.grow(grad);
    for (const Leaf& leaf : grower.leaves()) {
      const auto rows = grower.rows_of(leaf);
      double value;
      if (level) {
        residual_buf.clear();
        for (std::uint32_t row : rows) residual_buf.push_back(target[row] - fitted[row]);
        value = empirical_quantile(residual_buf, *level);
      } else {
        double s = 0.0;
        for (std::uint32_t row : rows) s += grad[row];
        value = s / static_cast<double>(rows.size());
      }
      value *= params.learning_rate;
      tree.nodes[static_cast<std::size_t>(leaf.node)].value = value;
      for (std::uint32_t row : rows) fitted[row] += value;
    }
    trees.push_back(std::move(tree));
  }
  return std::make_shared<TreeEnsemblePredictor>(base, std::move(trees),
                                                 features.cols());
}

}  // namespace cpshap::detail
