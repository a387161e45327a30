#pragma once

// Shared fixtures and an independent forward-pass oracle for the unit tests.

#include "intrafair/nn.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace testsupport {

using namespace intrafair;

inline Dataset random_dataset(int n, int d, std::uint64_t seed, double p_label = 0.5, double p_attr = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::bernoulli_distribution label(p_label), attr(p_attr);
    Dataset data;
    data.features.resize(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) data.features(i, j) = normal(rng);
    for (int i = 0; i < n; ++i) {
        data.labels.push_back(label(rng));
        data.protected_attr.push_back(attr(rng));
    }
    return data;
}

/// Dataset with both groups present among the positives and overall.
inline Dataset balanced_dataset(int n, int d, std::uint64_t seed) {
    Dataset data = random_dataset(n, d, seed);
    for (int i = 0; i < n; ++i) {
        data.labels[i] = (i / 2) % 2 == 0 ? 1 : 0;
        data.protected_attr[i] = i % 2;
    }
    return data;
}

/// Random weights plus non-trivial batchnorm parameters and running stats.
inline MlpModel random_model(int input_width, const std::vector<LayerSpec>& arch, std::uint64_t seed) {
    MlpModel m = make_mlp(input_width, arch, seed);
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    std::uniform_real_distribution<double> u(-0.5, 0.5), pos(0.5, 1.5);
    for (auto& layer : m.layers) {
        if (layer.spec.kind != LayerKind::batchnorm) continue;
        for (Eigen::Index j = 0; j < layer.scale.size(); ++j) {
            layer.scale[j] = pos(rng);
            layer.shift[j] = u(rng);
            layer.running_mean[j] = u(rng);
            layer.running_var[j] = pos(rng);
        }
    }
    return m;
}

/// Straight-line eval-mode forward pass, written against the layer
/// definitions rather than the library's tape. `offsets[l][j]` is added to
/// the pre-activation of unit j in hidden linear layer l.
inline std::vector<double> oracle_forward(const MlpModel& m, const Matrix& x,
                                          const std::vector<std::vector<double>>& offsets = {}) {
    std::vector<double> out;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        std::vector<double> h(x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) h[c] = x(r, c);
        int hidden = -1;           // hidden linear layer that produced h
        int pending_mask = -1;     // hidden layer whose mask applies at the next linear input
        std::size_t linear_seen = 0;
        std::size_t n_hidden = m.num_hidden_layers();
        for (const auto& layer : m.layers) {
            switch (layer.spec.kind) {
                case LayerKind::linear: {
                    if (pending_mask >= 0)
                        for (std::size_t j = 0; j < h.size(); ++j)
                            if (m.pruned[pending_mask][j]) h[j] = 0.0;
                    std::vector<double> z(layer.weight.rows());
                    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
                        double s = layer.bias[i];
                        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) s += layer.weight(i, j) * h[j];
                        z[i] = s;
                    }
                    if (linear_seen < n_hidden) {
                        hidden = static_cast<int>(linear_seen);
                        if (!offsets.empty())
                            for (std::size_t i = 0; i < z.size(); ++i) z[i] += offsets[hidden][i];
                        pending_mask = hidden;
                    } else {
                        pending_mask = -1;
                    }
                    ++linear_seen;
                    h = z;
                    break;
                }
                case LayerKind::relu:
                    for (auto& v : h) v = v > 0.0 ? v : 0.0;
                    break;
                case LayerKind::dropout: break;
                case LayerKind::batchnorm:
                    for (std::size_t j = 0; j < h.size(); ++j)
                        h[j] = layer.scale[j] * (h[j] - layer.running_mean[j]) /
                                   std::sqrt(layer.running_var[j] + kBatchNormEpsilon) +
                               layer.shift[j];
                    break;
                case LayerKind::sigmoid:
                    for (auto& v : h) v = 1.0 / (1.0 + std::exp(-v));
                    break;
            }
        }
        out.push_back(h[0]);
    }
    return out;
}

inline double oracle_proxy(const std::vector<double>& s, const Dataset& d, bool eod) {
    double s0 = 0, s1 = 0, n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (eod && d.labels[i] != 1) continue;
        if (d.protected_attr[i] == 0) {
            s0 += s[i];
            n0 += 1;
        } else {
            s1 += s[i];
            n1 += 1;
        }
    }
    return s0 / n0 - s1 / n1;
}

inline double oracle_bce(const std::vector<double>& s, const Dataset& d) {
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        total -= d.labels[i] ? std::log(s[i]) : std::log(1.0 - s[i]);
    return total / static_cast<double>(s.size());
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::max(std::abs(a), std::abs(b))); }

}  // namespace testsupport
