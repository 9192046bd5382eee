#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace arbmarl::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class OutputKind : std::uint32_t { Linear = 0, Logistic = 1 };

/// Dense network with rectifier hidden layers. Logistic outputs are mapped
/// affinely onto the box [lo, hi] per output. Parameters live in one flat
/// vector: for each layer the column-major weight matrix, then the bias.
/// Batches are passed column-wise (one sample per column).
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> sizes, OutputKind output, Vec lo = {}, Vec hi = {});

    /// Uniform fan-in initialisation: weights and biases in +-1/sqrt(fan_in).
    void init(std::mt19937_64& rng);

    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    const std::vector<int>& sizes() const { return sizes_; }
    OutputKind output_kind() const { return output_; }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }

    Vec& params() { return params_; }
    const Vec& params() const { return params_; }
    std::size_t num_params() const { return static_cast<std::size_t>(params_.size()); }

    /// Throws DimensionMismatch.
    Mat forward(const Mat& x);
    /// Forward pass without touching the cache.
    Mat predict(const Mat& x) const;

    /// Backpropagates dL/dy of the cached batch. Returns dL/dx; parameter
    /// gradients summed over the batch are written to `grad`. Throws NoCache
    /// or DimensionMismatch.
    Mat backward(const Mat& dy, Vec& grad);

private:
    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const;
    Mat run(const Mat& x, std::vector<Mat>* acts) const;

    std::vector<int> sizes_;
    std::vector<std::size_t> offsets_;
    OutputKind output_ = OutputKind::Linear;
    Vec lo_, hi_;
    Vec params_;
    std::vector<Mat> acts_;  // layer inputs and final pre-activation of the cached batch
};

struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    Vec m, v;
    std::uint64_t t = 0;

    Adam() = default;
    Adam(std::size_t n, double learning_rate);

    /// Gradient-descent step; pass the negated gradient to ascend. Throws DimensionMismatch.
    void step(Vec& params, const Vec& grad);
};

struct SmoothL1 {
    double loss = 0.0;
    Vec grad;  // derivative of the mean loss per residual
};

/// Mean over the batch of 0.5 z^2 (|z| <= 1) or |z| - 0.5. Throws EmptyBatch.
SmoothL1 smooth_l1(const Vec& residuals);

/// target <- tau * source + (1 - tau) * target. Throws DimensionMismatch or ConfigError.
void soft_update(Vec& target, const Vec& source, double tau);

/// clip(mu + noise, lo, hi)
double noisy_action(double mu, double noise, double lo, double hi);

/// Seeded Gaussian exploration noise whose scale decays geometrically per episode.
class NoiseProcess {
public:
    NoiseProcess(double sigma, double kappa, std::uint64_t seed);
    double sigma() const { return sigma_; }
    double draw();
    void decay() { sigma_ *= kappa_; }

private:
    double sigma_;
    double kappa_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

struct Transition {
    Vec obs;
    Vec action;
    double reward = 0.0;
    Vec next_obs;
    bool terminal = false;
};

struct Batch {
    Mat obs, action, next_obs;  // one column per sample
    Vec reward;
    Vec not_terminal;  // 0 at episode ends, 1 otherwise
    std::size_t size() const { return static_cast<std::size_t>(reward.size()); }
};

/// Fixed-capacity FIFO store sampled uniformly with replacement.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const;  // 0 is the oldest

    /// Throws InsufficientSamples when fewer than n items are stored.
    std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const;
    Batch sample(std::size_t n, std::mt19937_64& rng) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // oldest item once full
    std::vector<Transition> items_;
};

/// Binary dump of several networks: shapes, output kind, boxes and raw
/// parameters. Throws CheckpointError.
void save_networks(const std::filesystem::path& path, const std::vector<const Mlp*>& nets);
std::vector<Mlp> load_networks(const std::filesystem::path& path);

}  // namespace arbmarl::nn
