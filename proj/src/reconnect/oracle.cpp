#include "reconnect/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "common/error.hpp"
#include "volgrid/ops.hpp"

namespace vr::recon {

namespace {

std::vector<float> patch(const Volume& vol, const VoxelCoord& a, int side) {
    const int h = side / 2;
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(side) * side * side);
    for (int dk = -h; dk < side - h; ++dk)
        for (int dj = -h; dj < side - h; ++dj)
            for (int di = -h; di < side - h; ++di) out.push_back(vol.clamped(a.i + di, a.j + dj, a.k + dk));
    return out;
}

int bin_start(int o, int in, int out) { return (o * in) / out; }
int bin_end(int o, int in, int out) { return ((o + 1) * in + out - 1) / out; }

// Feature position -> radial shell (squared offset from the patch centre),
// numbered separately for each cubic block.
std::vector<int> radial_shells(int small, int& count) {
    const int h = small / 2;
    std::vector<int> r2s;
    for (int k = -h; k <= h; ++k)
        for (int j = -h; j <= h; ++j)
            for (int i = -h; i <= h; ++i) r2s.push_back(i * i + j * j + k * k);
    std::vector<int> uniq = r2s;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const int per_block = static_cast<int>(uniq.size());
    count = 2 * per_block;
    std::vector<int> out;
    for (int b = 0; b < 2; ++b)
        for (int r2 : r2s)
            out.push_back(b * per_block +
                          static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), r2) - uniq.begin()));
    return out;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// Up to k distinct elements, order fixed by the generator.
std::vector<VoxelCoord> sample(std::vector<VoxelCoord> pool, std::size_t k, std::mt19937_64& rng) {
    k = std::min(k, pool.size());
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + pick(rng, pool.size() - i)]);
    pool.resize(k);
    return pool;
}

}  // namespace

std::vector<double> p_features(const Volume& vol, const VoxelCoord& a, int big, int small) {
    if (big < 1 || small < 1 || big % 2 == 0 || small % 2 == 0) fail(ErrorCode::EvenKernel, "patch sizes must be odd and positive");
    if (small > big) fail(ErrorCode::InvalidArgument, "small patch larger than big patch");
    const auto bp = patch(vol, a, big);
    const auto sp = patch(vol, a, small);
    std::vector<double> out;
    out.reserve(2 * sp.size());
    for (int ok = 0; ok < small; ++ok)
        for (int oj = 0; oj < small; ++oj)
            for (int oi = 0; oi < small; ++oi) {
                float m = -std::numeric_limits<float>::infinity();
                for (int k = bin_start(ok, big, small); k < bin_end(ok, big, small); ++k)
                    for (int j = bin_start(oj, big, small); j < bin_end(oj, big, small); ++j)
                        for (int i = bin_start(oi, big, small); i < bin_end(oi, big, small); ++i)
                            m = std::max(m, bp[(static_cast<std::size_t>(k) * big + j) * big + i]);
                out.push_back(m);
            }
    for (float v : sp) out.push_back(v);
    return out;
}

void LinearPatchOracle::fit(const Volume& vol, const Volume& mask, const Volume& centerline) {
    require_same_dims(vol, mask, "oracle fit");
    require_same_dims(vol, centerline, "oracle fit");
    std::vector<VoxelCoord> pos, lumen, shell;
    const Volume outside = mask.count_nonzero() > 0 ? euclidean_dt(mask, true) : Volume::like(mask, VolumeKind::Distance, 1e9f);
    const Volume near_cl = dilate(centerline.thresholded(0.5f), params_.centerline_margin);
    for (std::size_t idx = 0; idx < vol.size(); ++idx) {
        const VoxelCoord c = vol.coord(idx);
        if (centerline.data()[idx] > 0.5f)
            pos.push_back(c);
        else if (mask.data()[idx] > 0.5f) {
            if (near_cl.data()[idx] < 0.5f) lumen.push_back(c);
        }
        else if (outside.data()[idx] <= params_.shell)
            shell.push_back(c);
    }
    if (pos.empty()) fail(ErrorCode::EmptySkeleton, "oracle training needs centerline voxels");
    std::mt19937_64 rng(params_.seed);
    std::vector<VoxelCoord> points = pos;
    std::vector<int> labels(pos.size(), 1);
    for (const auto& pool : {&lumen, &shell})
        for (const auto& c : sample(*pool, 2 * pos.size(), rng)) {
            points.push_back(c);
            labels.push_back(0);
        }
    fit_samples(vol, points, labels);
}

LinearPatchOracle::LinearPatchOracle(LinearOracleParams params) : params_(params) {
    if (params_.radial) {
        int count = 0;
        shell_of_ = radial_shells(params_.small, count);
        shell_size_.assign(static_cast<std::size_t>(count), 0.0);
        for (int s : shell_of_) shell_size_[static_cast<std::size_t>(s)] += 1.0;
    }
}

std::vector<double> LinearPatchOracle::reduce(const std::vector<double>& f) const {
    if (!params_.radial) return f;
    std::vector<double> out(shell_size_.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) out[static_cast<std::size_t>(shell_of_[i])] += f[i];
    for (std::size_t s = 0; s < out.size(); ++s) out[s] /= shell_size_[s];
    return out;
}

void LinearPatchOracle::fit_samples(const Volume& vol, const std::vector<VoxelCoord>& points,
                                    const std::vector<int>& labels) {
    if (points.size() != labels.size() || points.empty())
        fail(ErrorCode::InvalidArgument, "oracle samples and labels must be non-empty and equal length");
    const std::size_t n = points.size();
    std::vector<std::vector<double>> x(n);
    for (std::size_t s = 0; s < n; ++s) x[s] = reduce(p_features(vol, points[s], params_.big, params_.small));
    fit_matrix(x, labels);
}

void LinearPatchOracle::fit_matrix(std::vector<std::vector<double>>& x, const std::vector<int>& labels) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto d = static_cast<Eigen::Index>(x[0].size());
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = x[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    x.clear();
    const Eigen::RowVectorXd mean = m.colwise().mean();
    m.rowwise() -= mean;
    Eigen::RowVectorXd scale = (m.colwise().squaredNorm() / double(n)).cwiseSqrt();
    for (Eigen::Index c = 0; c < d; ++c) scale(c) = scale(c) > 1e-12 ? 1.0 / scale(c) : 0.0;
    m = m.array().rowwise() * scale.array();

    Eigen::VectorXd y(n), sw(n);
    double npos = 0.0;
    for (int l : labels) npos += l ? 1.0 : 0.0;
    const double wpos = npos > 0.0 ? 0.5 * double(n) / npos : 0.0;
    const double wneg = npos < double(n) ? 0.5 * double(n) / (double(n) - npos) : 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        y(r) = labels[static_cast<std::size_t>(r)] ? 1.0 : 0.0;
        sw(r) = y(r) > 0.5 ? wpos : wneg;
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    for (int it = 0; it < params_.iterations; ++it) {
        Eigen::VectorXd z = m * w;
        for (Eigen::Index r = 0; r < n; ++r) z(r) = (sigmoid(z(r) + b) - y(r)) * sw(r);
        const Eigen::VectorXd grad = m.transpose() * z;
        w -= params_.learning_rate * (grad / double(n) + params_.l2 * w);
        b -= params_.learning_rate * z.sum() / double(n);
    }
    mean_.assign(mean.data(), mean.data() + d);
    scale_.assign(scale.data(), scale.data() + d);
    weights_.assign(w.data(), w.data() + d);
    bias_ = b;
}

double LinearPatchOracle::query(const Volume& vol, const VoxelCoord& a) const {
    if (!trained()) fail(ErrorCode::UntrainedOracle, "linear oracle queried before fitting");
    const auto f = reduce(p_features(vol, a, params_.big, params_.small));
    double z = bias_;
    for (std::size_t i = 0; i < f.size(); ++i) z += weights_[i] * (f[i] - mean_[i]) * scale_[i];
    return sigmoid(z);
}

PercentileOracle::PercentileOracle(const Volume& vol, double low_pct, double high_pct) {
    if (vol.empty()) fail(ErrorCode::InvalidArgument, "percentile oracle needs a volume");
    if (!(low_pct >= 0.0 && low_pct < high_pct && high_pct <= 100.0))
        fail(ErrorCode::InvalidArgument, "percentiles must satisfy 0 <= low < high <= 100");
    std::vector<float> v(vol.data().begin(), vol.data().end());
    std::sort(v.begin(), v.end());
    auto at = [&](double pct) {
        const double pos = pct / 100.0 * double(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        return double(v[lo]) + (pos - double(lo)) * (double(v[hi]) - double(v[lo]));
    };
    low_ = at(low_pct);
    high_ = at(high_pct);
}

double PercentileOracle::query(const Volume& vol, const VoxelCoord& a) const {
    if (high_ <= low_) return 0.5;
    double sum = 0.0;
    for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) sum += vol.clamped(a.i + di, a.j + dj, a.k + dk);
    return std::clamp((sum / 27.0 - low_) / (high_ - low_), 0.0, 1.0);
}

std::vector<double> p_normalize(const std::vector<double>& scores) {
    if (scores.empty()) return {};
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double mn = *lo, mx = *hi;
    std::vector<double> out(scores.size(), 0.5);
    if (mx > mn)
        for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - mn) / (mx - mn);
    return out;
}

}  // namespace vr::recon
