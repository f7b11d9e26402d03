#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"

namespace mpap::gbdt {

enum class Mode { gbdt, dart, goss };
enum class Loss { squared_error, logistic };

std::string to_string(Mode m);
std::string to_string(Loss l);
Mode mode_from_string(const std::string& s);
Loss loss_from_string(const std::string& s);

struct BoostingConfig {
  int n_trees = 100;
  double learning_rate = 0.1;
  int max_depth = 4;
  int min_samples_leaf = 1;
  double min_gain = 0.0;
  double feature_fraction = 1.0;
  double lambda = 1.0;  // leaf L2
  // DART
  double drop_rate = 0.1;
  int max_dropped = 50;
  // GOSS
  double top_rate = 0.2;    // a
  double other_rate = 0.1;  // b

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  bool default_left = true;  // direction for missing values (reserved)
  double value = 0.0;        // leaf value

  bool is_leaf() const { return feature < 0; }
};

// Nodes stored in preorder, root at index 0.
struct Tree {
  std::vector<TreeNode> nodes;
  double eval(const double* row) const;
};

struct Ensemble {
  Mode mode = Mode::gbdt;
  Loss loss = Loss::squared_error;
  BoostingConfig config;
  std::uint64_t seed = 0;
  double base_score = 0.0;
  std::vector<Tree> trees;
  std::vector<double> weights;  // one per tree

  double predict_raw(const double* row) const;
  double predict_row(const double* row) const;  // sigmoid applied for logistic
  std::vector<double> predict(const Matrix& rows) const;

  std::string to_json() const;
  static Ensemble from_json(const std::string& text);
  void save(const std::string& path) const;
  static Ensemble load(const std::string& path);
};

// g, h for the configured loss at the current raw predictions.
// squared error: g = pred - y, h = 1. logistic: p = sigmoid(pred),
// g = p - y, h = p(1-p).
void loss_gradients(Loss loss, const std::vector<double>& targets,
                    const std::vector<double>& predictions, std::vector<double>& gradients,
                    std::vector<double>& hessians);

// Greedy exact-split CART on weighted gradient/hessian sums. Tie-break:
// lowest feature index, then lowest threshold. Leaf value = -G/(H+lambda);
// the learning rate is applied through the tree weight.
Tree build_tree(const Matrix& rows, const std::vector<double>& gradients,
                const std::vector<double>& hessians, const std::vector<double>& sample_weights,
                const BoostingConfig& config);

// Tree built on a row subset / feature subset (training internals, exposed
// for tests).
Tree build_tree_subset(const Matrix& rows, const std::vector<double>& gradients,
                       const std::vector<double>& hessians,
                       const std::vector<double>& sample_weights,
                       const std::vector<std::size_t>& row_indices,
                       const std::vector<int>& feature_indices, const BoostingConfig& config);

struct GossSample {
  std::vector<std::size_t> indices;  // ascending
  std::vector<double> weights;       // aligned with indices
};

// Keep ceil(a*n) largest-|g| rows at weight 1, sample ceil(b*n) of the rest
// at weight (1-a)/b.
GossSample goss_sample(const std::vector<double>& gradients, double a, double b, Rng& rng);

struct DartDrop {
  std::vector<std::size_t> dropped;  // ascending tree indices
  double new_tree_scale = 1.0;       // 1/(k+1)
  double dropped_rescale = 1.0;      // k/(k+1)
};

// Each existing tree dropped independently with probability drop_rate; at
// least one is dropped whenever trees exist and drop_rate > 0.
DartDrop dart_drop(std::size_t n_existing_trees, double drop_rate, std::size_t max_dropped,
                   Rng& rng);

Ensemble train(const Matrix& rows, const std::vector<double>& targets, const BoostingConfig& config,
               Mode mode, Loss loss, std::uint64_t seed);

}  // namespace mpap::gbdt
