#include "gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace mpap::gbdt {

using nlohmann::json;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::gbdt: return "gbdt";
    case Mode::dart: return "dart";
    case Mode::goss: return "goss";
  }
  return "gbdt";
}

std::string to_string(Loss l) {
  return l == Loss::squared_error ? "squared_error" : "logistic";
}

Mode mode_from_string(const std::string& s) {
  if (s == "gbdt") return Mode::gbdt;
  if (s == "dart") return Mode::dart;
  if (s == "goss") return Mode::goss;
  throw UsageError("unknown boosting mode: " + s);
}

Loss loss_from_string(const std::string& s) {
  if (s == "squared_error") return Loss::squared_error;
  if (s == "logistic") return Loss::logistic;
  throw UsageError("unknown loss: " + s);
}

void BoostingConfig::validate() const {
  if (n_trees < 0) throw UsageError("n_trees must be >= 0");
  if (!(learning_rate > 0.0) || learning_rate > 1.0) throw UsageError("learning_rate must be in (0,1]");
  if (max_depth < 1) throw UsageError("max_depth must be >= 1");
  if (min_samples_leaf < 1) throw UsageError("min_samples_leaf must be >= 1");
  if (min_gain < 0.0) throw UsageError("min_gain must be >= 0");
  if (!(feature_fraction > 0.0) || feature_fraction > 1.0) throw UsageError("feature_fraction must be in (0,1]");
  if (lambda < 0.0) throw UsageError("lambda must be >= 0");
  if (drop_rate < 0.0 || drop_rate > 1.0) throw UsageError("drop_rate must be in [0,1]");
  if (max_dropped < 1) throw UsageError("max_dropped must be >= 1");
  if (top_rate < 0.0 || other_rate < 0.0 || top_rate + other_rate > 1.0 + 1e-12) {
    throw UsageError("GOSS rates need a >= 0, b >= 0, a + b <= 1");
  }
}

double Tree::eval(const double* row) const {
  int i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    const double v = row[n.feature];
    if (std::isnan(v)) {
      i = n.default_left ? n.left : n.right;
    } else {
      i = v < n.threshold ? n.left : n.right;
    }
  }
  return nodes[i].value;
}

static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double Ensemble::predict_raw(const double* row) const {
  double s = base_score;
  for (std::size_t t = 0; t < trees.size(); ++t) s += weights[t] * trees[t].eval(row);
  return s;
}

double Ensemble::predict_row(const double* row) const {
  const double raw = predict_raw(row);
  return loss == Loss::logistic ? sigmoid(raw) : raw;
}

std::vector<double> Ensemble::predict(const Matrix& rows) const {
  if (rows.cols == 0 || rows.rows == 0) throw DataError("empty prediction matrix");
  for (const Tree& t : trees) {
    for (const TreeNode& n : t.nodes) {
      if (!n.is_leaf() && n.feature >= static_cast<int>(rows.cols)) {
        throw DataError("prediction matrix is narrower than the training features");
      }
    }
  }
  std::vector<double> out(rows.rows);
  for (std::size_t r = 0; r < rows.rows; ++r) out[r] = predict_row(rows.row(r));
  return out;
}

void loss_gradients(Loss loss, const std::vector<double>& targets,
                    const std::vector<double>& predictions, std::vector<double>& gradients,
                    std::vector<double>& hessians) {
  if (targets.size() != predictions.size()) throw DataError("targets/predictions length mismatch");
  const std::size_t n = targets.size();
  gradients.resize(n);
  hessians.resize(n);
  switch (loss) {
    case Loss::squared_error:
      for (std::size_t i = 0; i < n; ++i) {
        gradients[i] = predictions[i] - targets[i];
        hessians[i] = 1.0;
      }
      break;
    case Loss::logistic:
      for (std::size_t i = 0; i < n; ++i) {
        const double p = sigmoid(predictions[i]);
        gradients[i] = p - targets[i];
        hessians[i] = p * (1.0 - p);
      }
      break;
  }
}

namespace {

using FeatureOrder = std::vector<std::vector<std::uint32_t>>;

// Per-feature row order over the whole matrix, stable sorted by value so
// ties keep ascending row index. Computed once per training run.
FeatureOrder presort_features(const Matrix& rows) {
  FeatureOrder order(rows.cols);
  for (std::size_t f = 0; f < rows.cols; ++f) {
    auto& o = order[f];
    o.resize(rows.rows);
    std::iota(o.begin(), o.end(), std::uint32_t{0});
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      return rows.at(a, f) < rows.at(b, f);
    });
  }
  return order;
}

// Level-wise exact split search: one pass over each presorted feature column
// per depth level, dispatching rows to their node's running left sums. The
// accumulation order per (node, feature) matches a per-node ascending scan,
// so gains and tie-breaks (lowest feature, then lowest threshold) are exact.
Tree build_tree_presorted(const Matrix& rows, const std::vector<double>& g,
                          const std::vector<double>& h, const std::vector<double>& w,
                          const std::vector<std::size_t>& row_indices,
                          const std::vector<int>& features, const BoostingConfig& cfg,
                          const FeatureOrder& order) {
  struct NodeState {
    double gsum = 0.0, hsum = 0.0;
    std::size_t count = 0;
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_gain = 0.0;
    // per-feature scan state
    double gl = 0.0, hl = 0.0;
    double prev = 0.0;
    std::size_t left_count = 0;
    int node_index = -1;  // position in the output tree
  };

  const auto min_leaf = static_cast<std::size_t>(cfg.min_samples_leaf);
  std::vector<std::int32_t> node_of(rows.rows, -1);
  for (const auto r : row_indices) node_of[r] = 0;

  std::vector<TreeNode> nodes;
  nodes.emplace_back();
  std::vector<NodeState> level(1);
  level[0].node_index = 0;
  std::size_t level_first = 0;  // node id of the first state in `level`

  for (int depth = 0; depth <= cfg.max_depth && !level.empty(); ++depth) {
    for (auto& s : level) {
      s.gsum = 0.0;
      s.hsum = 0.0;
      s.count = 0;
      s.best_feature = -1;
      s.best_gain = cfg.min_gain;  // a split must beat this strictly
    }
    for (std::size_t r = 0; r < rows.rows; ++r) {
      const auto u = node_of[r];
      if (u < 0) continue;
      auto& s = level[static_cast<std::size_t>(u) - level_first];
      s.gsum += w[r] * g[r];
      s.hsum += w[r] * h[r];
      ++s.count;
    }

    if (depth < cfg.max_depth) {
      for (const int f : features) {
        for (auto& s : level) s.left_count = 0;
        for (const auto r : order[f]) {
          const auto u = node_of[r];
          if (u < 0) continue;
          auto& s = level[static_cast<std::size_t>(u) - level_first];
          if (s.count < 2 * min_leaf) continue;
          const double v = rows.at(r, f);
          if (s.left_count == 0) {
            s.gl = 0.0;
            s.hl = 0.0;
          } else if (v != s.prev && s.left_count >= min_leaf &&
                     s.count - s.left_count >= min_leaf) {
            const double gr = s.gsum - s.gl;
            const double hr = s.hsum - s.hl;
            const double gain = s.gl * s.gl / (s.hl + cfg.lambda) +
                                gr * gr / (hr + cfg.lambda) -
                                s.gsum * s.gsum / (s.hsum + cfg.lambda);
            if (gain > s.best_gain) {
              s.best_gain = gain;
              s.best_feature = f;
              s.best_threshold = 0.5 * (s.prev + v);
            }
          }
          s.gl += w[r] * g[r];
          s.hl += w[r] * h[r];
          s.prev = v;
          ++s.left_count;
        }
      }
    }

    // materialize splits / leaves, assign rows to next-level nodes
    const std::size_t next_first = level_first + level.size();
    std::vector<NodeState> next;
    for (auto& s : level) {
      TreeNode& node = nodes[static_cast<std::size_t>(s.node_index)];
      if (s.best_feature < 0) {
        node.value = -s.gsum / (s.hsum + cfg.lambda);
        continue;
      }
      node.feature = s.best_feature;
      node.threshold = s.best_threshold;
      node.left = static_cast<int>(nodes.size());
      node.right = node.left + 1;
      nodes.emplace_back();
      nodes.emplace_back();
      NodeState l, r;
      l.node_index = node.left;
      r.node_index = node.right;
      next.push_back(l);
      next.push_back(r);
    }
    for (std::size_t r = 0; r < rows.rows; ++r) {
      const auto u = node_of[r];
      if (u < 0) continue;
      const auto& s = level[static_cast<std::size_t>(u) - level_first];
      if (s.best_feature < 0) {
        node_of[r] = -1;  // settled in a leaf
      } else {
        const TreeNode& node = nodes[static_cast<std::size_t>(s.node_index)];
        node_of[r] = rows.at(r, node.feature) < node.threshold ? node.left : node.right;
      }
    }
    // renumber next-level membership to be contiguous from next_first
    if (!next.empty()) {
      std::vector<std::int32_t> remap(nodes.size(), -1);
      for (std::size_t i = 0; i < next.size(); ++i) {
        remap[static_cast<std::size_t>(next[i].node_index)] =
            static_cast<std::int32_t>(next_first + i);
      }
      for (std::size_t r = 0; r < rows.rows; ++r) {
        if (node_of[r] >= 0) node_of[r] = remap[static_cast<std::size_t>(node_of[r])];
      }
    }
    level_first = next_first;
    level = std::move(next);
  }

  // nodes were appended breadth-first; rewrite to preorder
  Tree t;
  t.nodes.reserve(nodes.size());
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const int at = stack.back();
    stack.pop_back();
    const TreeNode& src = nodes[static_cast<std::size_t>(at)];
    t.nodes.push_back(src);
    if (!src.is_leaf()) {
      // children follow in preorder: left at self+1, right after the whole
      // left subtree; patch indices after emission
      stack.push_back(src.right);
      stack.push_back(src.left);
    }
  }
  // rebuild child links for the preorder layout
  {
    std::vector<int> position(nodes.size());
    std::vector<int> stack2 = {0};
    int emit = 0;
    while (!stack2.empty()) {
      const int at = stack2.back();
      stack2.pop_back();
      position[static_cast<std::size_t>(at)] = emit++;
      const TreeNode& src = nodes[static_cast<std::size_t>(at)];
      if (!src.is_leaf()) {
        stack2.push_back(src.right);
        stack2.push_back(src.left);
      }
    }
    for (auto& node : t.nodes) {
      if (!node.is_leaf()) {
        node.left = position[static_cast<std::size_t>(node.left)];
        node.right = position[static_cast<std::size_t>(node.right)];
      }
    }
  }
  return t;
}

}  // namespace

Tree build_tree_subset(const Matrix& rows, const std::vector<double>& gradients,
                       const std::vector<double>& hessians,
                       const std::vector<double>& sample_weights,
                       const std::vector<std::size_t>& row_indices,
                       const std::vector<int>& feature_indices, const BoostingConfig& config) {
  if (row_indices.empty()) throw DataError("build_tree on empty row set");
  for (const auto i : row_indices) {
    if (!(sample_weights[i] > 0.0)) throw DataError("sample weights must be positive");
  }
  return build_tree_presorted(rows, gradients, hessians, sample_weights, row_indices,
                              feature_indices, config, presort_features(rows));
}

Tree build_tree(const Matrix& rows, const std::vector<double>& gradients,
                const std::vector<double>& hessians, const std::vector<double>& sample_weights,
                const BoostingConfig& config) {
  config.validate();
  if (rows.rows == 0 || rows.cols == 0) throw DataError("build_tree on empty matrix");
  if (gradients.size() != rows.rows || hessians.size() != rows.rows ||
      sample_weights.size() != rows.rows) {
    throw DataError("gradient/hessian/weight length mismatch");
  }
  std::vector<std::size_t> all(rows.rows);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<int> feats(rows.cols);
  std::iota(feats.begin(), feats.end(), 0);
  return build_tree_subset(rows, gradients, hessians, sample_weights, all, feats, config);
}

GossSample goss_sample(const std::vector<double>& gradients, double a, double b, Rng& rng) {
  if (a < 0.0 || b < 0.0 || a + b > 1.0 + 1e-12) throw UsageError("GOSS needs a,b >= 0 and a+b <= 1");
  const std::size_t n = gradients.size();
  const auto top_n = static_cast<std::size_t>(std::ceil(a * static_cast<double>(n)));
  auto rand_n = static_cast<std::size_t>(std::ceil(b * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(gradients[x]) > std::abs(gradients[y]);
  });

  GossSample s;
  for (std::size_t i = 0; i < std::min(top_n, n); ++i) {
    s.indices.push_back(order[i]);
    s.weights.push_back(1.0);
  }
  std::vector<std::size_t> rest(order.begin() + static_cast<long>(std::min(top_n, n)), order.end());
  std::sort(rest.begin(), rest.end());
  rand_n = std::min(rand_n, rest.size());
  const double amplify = rand_n > 0 ? (1.0 - a) / b : 1.0;
  // partial Fisher-Yates draw without replacement
  for (std::size_t i = 0; i < rand_n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(rest.size() - i));
    std::swap(rest[i], rest[j]);
    s.indices.push_back(rest[i]);
    s.weights.push_back(amplify);
  }

  // canonical ascending order keeps downstream tree building deterministic
  std::vector<std::size_t> perm(s.indices.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::sort(perm.begin(), perm.end(),
            [&](std::size_t x, std::size_t y) { return s.indices[x] < s.indices[y]; });
  GossSample out;
  for (const auto p : perm) {
    out.indices.push_back(s.indices[p]);
    out.weights.push_back(s.weights[p]);
  }
  return out;
}

DartDrop dart_drop(std::size_t n_existing_trees, double drop_rate, std::size_t max_dropped,
                   Rng& rng) {
  if (drop_rate < 0.0 || drop_rate > 1.0) throw UsageError("drop_rate must be in [0,1]");
  DartDrop d;
  if (n_existing_trees == 0 || drop_rate == 0.0) return d;
  for (std::size_t i = 0; i < n_existing_trees; ++i) {
    if (rng.bernoulli(drop_rate)) d.dropped.push_back(i);
  }
  if (d.dropped.empty()) d.dropped.push_back(rng.below(n_existing_trees));
  if (d.dropped.size() > max_dropped) {
    rng.shuffle(d.dropped);
    d.dropped.resize(max_dropped);
    std::sort(d.dropped.begin(), d.dropped.end());
  }
  const double k = static_cast<double>(d.dropped.size());
  d.new_tree_scale = 1.0 / (k + 1.0);
  d.dropped_rescale = k / (k + 1.0);
  return d;
}

Ensemble train(const Matrix& rows, const std::vector<double>& targets, const BoostingConfig& config,
               Mode mode, Loss loss, std::uint64_t seed) {
  config.validate();
  if (rows.rows == 0 || rows.cols == 0) throw DataError("training matrix is empty");
  if (targets.size() != rows.rows) throw DataError("target length mismatch");
  for (const double v : rows.data) {
    if (std::isnan(v)) throw DataError("training matrix contains NaN (impute first)");
  }
  for (const double y : targets) {
    if (!std::isfinite(y)) throw DataError("targets must be finite");
  }

  const std::size_t n = rows.rows;
  Ensemble ens;
  ens.mode = mode;
  ens.loss = loss;
  ens.config = config;
  ens.seed = seed;

  if (loss == Loss::logistic) {
    double pos = 0.0;
    for (const double y : targets) {
      if (y != 0.0 && y != 1.0) throw DataError("logistic targets must be 0/1");
      pos += y;
    }
    if (pos == 0.0 || pos == static_cast<double>(n)) {
      throw DataError("single-class logistic target (log-odds infinite)");
    }
    const double rate = pos / static_cast<double>(n);
    ens.base_score = std::log(rate / (1.0 - rate));
  } else {
    ens.base_score = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);
  }

  Rng rng(derive_seed(seed, "gbdt.train"));
  const FeatureOrder order = presort_features(rows);

  std::vector<double> raw(n, ens.base_score);
  std::vector<std::vector<double>> tree_out;  // per-tree per-sample outputs
  std::vector<double> g, h;
  std::vector<double> unit_weights(n, 1.0);
  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
  std::vector<int> all_feats(rows.cols);
  std::iota(all_feats.begin(), all_feats.end(), 0);

  const auto n_sub_feats = static_cast<std::size_t>(
      std::ceil(config.feature_fraction * static_cast<double>(rows.cols)));

  for (int round = 0; round < config.n_trees; ++round) {
    // feature subset first, so degenerate modes consume the stream identically
    std::vector<int> feats = all_feats;
    if (n_sub_feats < rows.cols) {
      for (std::size_t i = 0; i < n_sub_feats; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(feats.size() - i));
        std::swap(feats[i], feats[j]);
      }
      feats.resize(n_sub_feats);
      std::sort(feats.begin(), feats.end());
    }

    DartDrop drop;
    if (mode == Mode::dart) {
      drop = dart_drop(ens.trees.size(), config.drop_rate,
                       static_cast<std::size_t>(config.max_dropped), rng);
    }

    std::vector<double> pred = raw;
    if (!drop.dropped.empty()) {
      for (const auto t : drop.dropped) {
        for (std::size_t i = 0; i < n; ++i) pred[i] -= ens.weights[t] * tree_out[t][i];
      }
    }

    loss_gradients(loss, targets, pred, g, h);

    Tree tree;
    if (mode == Mode::goss) {
      const auto sample = goss_sample(g, config.top_rate, config.other_rate, rng);
      std::vector<double> weights(n, 1.0);
      for (std::size_t i = 0; i < sample.indices.size(); ++i) {
        weights[sample.indices[i]] = sample.weights[i];
      }
      tree = build_tree_presorted(rows, g, h, weights, sample.indices, feats, config, order);
    } else {
      tree = build_tree_presorted(rows, g, h, unit_weights, all_rows, feats, config, order);
    }

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = tree.eval(rows.row(i));

    const double new_weight = config.learning_rate * drop.new_tree_scale;
    if (!drop.dropped.empty()) {
      for (const auto t : drop.dropped) {
        const double old_w = ens.weights[t];
        ens.weights[t] = old_w * drop.dropped_rescale;
        const double delta = ens.weights[t] - old_w;
        for (std::size_t i = 0; i < n; ++i) raw[i] += delta * tree_out[t][i];
      }
    }
    for (std::size_t i = 0; i < n; ++i) raw[i] += new_weight * out[i];

    ens.trees.push_back(std::move(tree));
    ens.weights.push_back(new_weight);
    tree_out.push_back(std::move(out));
  }

  return ens;
}

// --- serialization -----------------------------------------------------

static json tree_to_json(const Tree& t) {
  json nodes = json::array();
  for (const TreeNode& n : t.nodes) {
    if (n.is_leaf()) {
      nodes.push_back({{"value", n.value}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"default_left", n.default_left}});
    }
  }
  return nodes;
}

static Tree tree_from_json(const json& j) {
  Tree t;
  for (const auto& jn : j) {
    TreeNode n;
    if (jn.contains("value")) {
      n.value = jn.at("value").get<double>();
    } else {
      n.feature = jn.at("feature").get<int>();
      n.threshold = jn.at("threshold").get<double>();
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
      n.default_left = jn.at("default_left").get<bool>();
    }
    t.nodes.push_back(n);
  }
  if (t.nodes.empty()) throw DataError("ensemble JSON: empty tree");
  return t;
}

static json config_to_json(const BoostingConfig& c) {
  return {{"n_trees", c.n_trees},
          {"learning_rate", c.learning_rate},
          {"max_depth", c.max_depth},
          {"min_samples_leaf", c.min_samples_leaf},
          {"min_gain", c.min_gain},
          {"feature_fraction", c.feature_fraction},
          {"lambda", c.lambda},
          {"drop_rate", c.drop_rate},
          {"max_dropped", c.max_dropped},
          {"top_rate", c.top_rate},
          {"other_rate", c.other_rate}};
}

static BoostingConfig config_from_json(const json& j) {
  BoostingConfig c;
  c.n_trees = j.at("n_trees").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_depth = j.at("max_depth").get<int>();
  c.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  c.min_gain = j.at("min_gain").get<double>();
  c.feature_fraction = j.at("feature_fraction").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.drop_rate = j.at("drop_rate").get<double>();
  c.max_dropped = j.at("max_dropped").get<int>();
  c.top_rate = j.at("top_rate").get<double>();
  c.other_rate = j.at("other_rate").get<double>();
  return c;
}

std::string Ensemble::to_json() const {
  json j;
  j["format_version"] = 1;
  j["mode"] = gbdt::to_string(mode);
  j["loss"] = gbdt::to_string(loss);
  j["seed"] = seed;
  j["base_score"] = base_score;
  j["config"] = config_to_json(config);
  json trees_json = json::array();
  for (std::size_t t = 0; t < trees.size(); ++t) {
    trees_json.push_back({{"weight", weights[t]}, {"nodes", tree_to_json(trees[t])}});
  }
  j["trees"] = std::move(trees_json);
  return j.dump(2);
}

Ensemble Ensemble::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("ensemble JSON parse error: ") + e.what());
  }
  if (j.at("format_version").get<int>() != 1) throw DataError("unsupported ensemble format version");
  Ensemble e;
  e.mode = mode_from_string(j.at("mode").get<std::string>());
  e.loss = loss_from_string(j.at("loss").get<std::string>());
  e.seed = j.at("seed").get<std::uint64_t>();
  e.base_score = j.at("base_score").get<double>();
  e.config = config_from_json(j.at("config"));
  for (const auto& jt : j.at("trees")) {
    e.weights.push_back(jt.at("weight").get<double>());
    e.trees.push_back(tree_from_json(jt.at("nodes")));
  }
  return e;
}

void Ensemble::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << to_json() << '\n';
}

Ensemble Ensemble::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace mpap::gbdt
