#include "arbmarl/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "arbmarl/errors.hpp"

namespace arbmarl::nn {

namespace {

using MapMat = Eigen::Map<Mat>;
using ConstMapMat = Eigen::Map<const Mat>;

Mat logistic(const Mat& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

}  // namespace

Mlp::Mlp(std::vector<int> sizes, OutputKind output, Vec lo, Vec hi)
    : sizes_(std::move(sizes)), output_(output), lo_(std::move(lo)), hi_(std::move(hi)) {
    if (sizes_.size() < 2) throw DimensionMismatch("a network needs an input and an output layer");
    for (int s : sizes_)
        if (s <= 0) throw DimensionMismatch("layer sizes must be positive");
    const int out = sizes_.back();
    if (output_ == OutputKind::Logistic) {
        if (lo_.size() == 0) lo_ = Vec::Zero(out);
        if (hi_.size() == 0) hi_ = Vec::Ones(out);
        if (lo_.size() != out || hi_.size() != out) throw DimensionMismatch("action box does not match the output");
        if (((hi_ - lo_).array() < 0.0).any()) throw DimensionMismatch("action box has lo > hi");
    } else {
        lo_.resize(0);
        hi_.resize(0);
    }
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(n);
        n += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(n));
}

std::size_t Mlp::bias_offset(std::size_t l) const {
    return offsets_[l] + static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1];
}

void Mlp::init(std::mt19937_64& rng) {
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        const std::size_t end = bias_offset(l) + sizes_[l + 1];
        for (std::size_t i = offsets_[l]; i < end; ++i) params_[static_cast<Eigen::Index>(i)] = u(rng);
    }
}

Mat Mlp::run(const Mat& x, std::vector<Mat>* acts) const {
    if (sizes_.empty()) throw DimensionMismatch("network is empty");
    if (x.rows() != sizes_.front())
        throw DimensionMismatch("input has " + std::to_string(x.rows()) + " rows, network expects " +
                                std::to_string(sizes_.front()));
    const std::size_t layers = sizes_.size() - 1;
    Mat a = x;
    for (std::size_t l = 0; l < layers; ++l) {
        ConstMapMat w(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        Eigen::Map<const Vec> b(params_.data() + bias_offset(l), sizes_[l + 1]);
        Mat z = w * a;
        z.colwise() += b;
        if (acts) acts->push_back(std::move(a));
        if (l + 1 < layers) {
            a = z.cwiseMax(0.0);
        } else {
            if (acts) acts->push_back(z);
            if (output_ == OutputKind::Linear) return z;
            Mat s = logistic(z);
            return ((s.array().colwise() * (hi_ - lo_).array()).colwise() + lo_.array()).matrix();
        }
    }
    return a;
}

Mat Mlp::forward(const Mat& x) {
    acts_.clear();
    try {
        return run(x, &acts_);
    } catch (...) {
        acts_.clear();
        throw;
    }
}

Mat Mlp::predict(const Mat& x) const { return run(x, nullptr); }

Mat Mlp::backward(const Mat& dy, Vec& grad) {
    if (acts_.empty()) throw NoCache("backward called without a cached forward pass");
    const std::size_t layers = sizes_.size() - 1;
    const Mat& z_out = acts_.back();
    if (dy.rows() != z_out.rows() || dy.cols() != z_out.cols())
        throw DimensionMismatch("upstream gradient does not match the cached output");

    grad = Vec::Zero(params_.size());
    Mat dz;
    if (output_ == OutputKind::Linear) {
        dz = dy;
    } else {
        const Mat s = logistic(z_out);
        Eigen::ArrayXXd ds = dy.array() * s.array() * (1.0 - s.array());
        ds.colwise() *= (hi_ - lo_).array();
        dz = ds.matrix();
    }
    for (std::size_t l = layers; l-- > 0;) {
        const Mat& a = acts_[l];
        MapMat gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        Eigen::Map<Vec> gb(grad.data() + bias_offset(l), sizes_[l + 1]);
        gw.noalias() = dz * a.transpose();
        gb = dz.rowwise().sum();
        ConstMapMat w(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        Mat da = w.transpose() * dz;
        if (l == 0) return da;
        dz = (da.array() * (a.array() > 0.0).cast<double>()).matrix();
    }
    return dz;
}

Adam::Adam(std::size_t n, double learning_rate)
    : lr(learning_rate), m(Vec::Zero(static_cast<Eigen::Index>(n))), v(Vec::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(Vec& params, const Vec& grad) {
    if (params.size() != grad.size() || params.size() != m.size())
        throw DimensionMismatch("Adam state, parameters and gradient differ in size");
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

SmoothL1 smooth_l1(const Vec& z) {
    if (z.size() == 0) throw EmptyBatch("smooth L1 loss of an empty batch");
    const double n = static_cast<double>(z.size());
    SmoothL1 out;
    out.grad.resize(z.size());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double a = std::abs(z[i]);
        if (a <= 1.0) {
            sum += 0.5 * z[i] * z[i];
            out.grad[i] = z[i] / n;
        } else {
            sum += a - 0.5;
            out.grad[i] = (z[i] > 0.0 ? 1.0 : -1.0) / n;
        }
    }
    out.loss = sum / n;
    return out;
}

void soft_update(Vec& target, const Vec& source, double tau) {
    if (target.size() != source.size()) throw DimensionMismatch("soft update between differently shaped networks");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("soft update rate must lie in [0, 1]");
    target = tau * source + (1.0 - tau) * target;
}

double noisy_action(double mu, double noise, double lo, double hi) { return std::clamp(mu + noise, lo, hi); }

NoiseProcess::NoiseProcess(double sigma, double kappa, std::uint64_t seed) : sigma_(sigma), kappa_(kappa), rng_(seed) {
    if (!(sigma >= 0.0)) throw ConfigError("noise scale must be >= 0");
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("noise decay must lie in [0, 1]");
}

double NoiseProcess::draw() { return sigma_ == 0.0 ? 0.0 : sigma_ * normal_(rng_); }

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, std::mt19937_64& rng) const {
    if (n == 0) throw EmptyBatch("minibatch size must be positive");
    if (items_.size() < n)
        throw InsufficientSamples("buffer holds " + std::to_string(items_.size()) + " items, " + std::to_string(n) +
                                  " requested");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

Batch ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
    const auto idx = sample_indices(n, rng);
    const auto& first = items_[idx[0]];
    Batch b;
    const auto cols = static_cast<Eigen::Index>(n);
    b.obs.resize(first.obs.size(), cols);
    b.action.resize(first.action.size(), cols);
    b.next_obs.resize(first.next_obs.size(), cols);
    b.reward.resize(cols);
    b.not_terminal.resize(cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        const auto& t = items_[idx[static_cast<std::size_t>(c)]];
        b.obs.col(c) = t.obs;
        b.action.col(c) = t.action;
        b.next_obs.col(c) = t.next_obs;
        b.reward[c] = t.reward;
        b.not_terminal[c] = t.terminal ? 0.0 : 1.0;
    }
    return b;
}

namespace {

constexpr char kMagic[8] = {'A', 'R', 'B', 'M', 'L', 'P', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw CheckpointError("checkpoint is truncated");
    return v;
}

void put_vec(std::ostream& os, const Vec& v) {
    put<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Vec get_vec(std::istream& is) {
    const auto n = get<std::uint64_t>(is);
    if (n > (1ull << 32)) throw CheckpointError("implausible vector length in checkpoint");
    Vec v(static_cast<Eigen::Index>(n));
    if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
        throw CheckpointError("checkpoint is truncated");
    return v;
}

}  // namespace

void save_networks(const std::filesystem::path& path, const std::vector<const Mlp*>& nets) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write " + path.string());
    os.write(kMagic, sizeof kMagic);
    put(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(nets.size()));
    for (const Mlp* net : nets) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(net->sizes().size()));
        for (int s : net->sizes()) put<std::int32_t>(os, s);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(net->output_kind()));
        put_vec(os, net->lo());
        put_vec(os, net->hi());
        put_vec(os, net->params());
    }
    if (!os) throw CheckpointError("failed writing " + path.string());
}

std::vector<Mlp> load_networks(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot read " + path.string());
    char magic[sizeof kMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw CheckpointError(path.string() + " is not a network checkpoint");
    if (get<std::uint32_t>(is) != kVersion) throw CheckpointError("unsupported checkpoint version");
    const auto count = get<std::uint32_t>(is);
    std::vector<Mlp> nets;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto layers = get<std::uint32_t>(is);
        if (layers < 2 || layers > 64) throw CheckpointError("implausible layer count in checkpoint");
        std::vector<int> sizes;
        for (std::uint32_t l = 0; l < layers; ++l) sizes.push_back(get<std::int32_t>(is));
        const auto kind = get<std::uint32_t>(is);
        if (kind > 1) throw CheckpointError("unknown output kind in checkpoint");
        Vec lo = get_vec(is), hi = get_vec(is);
        Mlp net;
        try {
            net = Mlp(sizes, static_cast<OutputKind>(kind), lo, hi);
        } catch (const Error& e) {
            throw CheckpointError(std::string("bad network shape in checkpoint: ") + e.what());
        }
        Vec p = get_vec(is);
        if (p.size() != net.params().size()) throw CheckpointError("parameter count does not match the shapes");
        net.params() = p;
        nets.push_back(std::move(net));
    }
    return nets;
}

}  // namespace arbmarl::nn
