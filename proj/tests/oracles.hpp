#pragma once

// Independent reference implementations used to cross-check the library.
// They avoid Eigen and the library's own helpers on purpose.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Dense = std::vector<std::vector<double>>;

double sigmoid(double x);
double dot(const std::vector<double>& a, const std::vector<double>& b);

// Scores every ordered pair u != v, sorts them all and counts hits in the top K.
std::size_t brute_force_hits(const Dense& src, const Dense& dst, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                             std::size_t k);

// Fraction of (positive, negative) pairs ordered correctly, ties counted 1/2.
double pair_count_auc(const std::vector<int>& labels, const std::vector<double>& scores);

// Micro F1 via accuracy, macro F1 via a confusion matrix and per-class precision/recall.
std::pair<double, double> confusion_f1(const std::vector<std::uint32_t>& truth, const std::vector<std::uint32_t>& pred,
                                       std::size_t classes);

double binary_f1(const std::vector<int>& truth, const std::vector<int>& pred);

// Element-wise edge feature; kind is 0 average, 1 hadamard, 2 |a-b|, 3 (a-b)^2.
std::vector<double> edge_feature(const std::vector<double>& a, const std::vector<double>& b, int kind);

// Weak component label per node from BFS over an undirected adjacency list.
std::vector<std::size_t> weak_components(std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges);
std::size_t component_count(const std::vector<std::size_t>& labels);

// tanh(x W^T + b) with explicit loops; W is out x in.
std::vector<double> dense_layer(const std::vector<double>& x, const Dense& w, const std::vector<double>& b, bool tanh_act);

// Penalized logistic loss minimized by plain gradient descent with a fixed step.
double logistic_gd_objective(const Dense& x, const std::vector<int>& y, double l2, std::size_t iterations, double step);

}  // namespace oracle
