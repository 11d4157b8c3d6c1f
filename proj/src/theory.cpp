#include "dewedge/theory.hpp"

#include <cmath>
#include <random>

#include "dewedge/fft.hpp"

namespace dewedge {

void MaskPairDistribution::validate() const {
    if (entries.empty()) throw invalid_input("mask distribution: empty");
    double total = 0.0;
    for (const auto& e : entries) {
        if (!(e.prob > 0.0)) throw invalid_input("mask distribution: probabilities must be > 0");
        if (e.m.dims != e.m_tilde.dims || e.m.dims != entries.front().m.dims)
            throw invalid_input("mask distribution: inconsistent mask shapes");
        total += e.prob;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw invalid_input("mask distribution: probabilities must sum to 1");
}

bool MaskPairDistribution::is_symmetric() const {
    for (const auto& e : entries) {
        double swapped_prob = 0.0;
        for (const auto& o : entries)
            if (masks_equal(o.m, e.m_tilde) && masks_equal(o.m_tilde, e.m)) swapped_prob += o.prob;
        if (swapped_prob != e.prob) return false;
    }
    return true;
}

bool MaskPairDistribution::non_overlapping() const {
    for (const auto& e : entries)
        for (std::size_t i = 0; i < e.m.keep.size(); ++i)
            if (!e.m.keep[i] && !e.m_tilde.keep[i]) return false;
    return true;
}

MaskPairDistribution symmetric_pair(const FourierMask& a, const FourierMask& b) {
    MaskPairDistribution dist;
    dist.entries.push_back({a, b, 0.5});
    dist.entries.push_back({b, a, 0.5});
    return dist;
}

MaskIdentityReport verify_mask_identity(Dims3 shape, std::int64_t trials, std::uint64_t seed) {
    if (trials < 1) throw invalid_input("verify_mask_identity: trials must be >= 1");
    MaskIdentityReport report;
    report.trials = trials;
    const std::size_t n = static_cast<std::size_t>(shape.total());
    for (std::int64_t t = 0; t < trials; ++t) {
        std::mt19937_64 rng(mix_seed(seed, 0x1dea, static_cast<std::uint64_t>(t)));
        std::uniform_int_distribution<int> bit(0, 1);
        std::vector<int> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = bit(rng);
        for (std::size_t i = 0; i < n; ++i) b[i] = bit(rng);
        for (std::size_t i = 0; i < n; ++i) {
            const int lhs = a[i] * b[i] + (1 - a[i]) * b[i] + (1 - b[i]) * a[i];
            const int rhs = 1 - (1 - a[i]) * (1 - b[i]);
            if (lhs != rhs) report.violations++;
        }
    }
    report.pass = report.violations == 0;
    return report;
}

namespace {

Volume gaussian_volume(const Dims3& dims, double voxel, double sigma, std::mt19937_64& rng) {
    Volume v(dims, voxel);
    if (sigma > 0.0) {
        std::normal_distribution<double> gauss(0.0, sigma);
        for (auto& x : v.data) x = gauss(rng);
    }
    return v;
}

double sq_norm_diff(const Volume& a, const Volume& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s;
}

struct MeanSe {
    double mean = 0.0, se = 0.0;
};

MeanSe mean_and_se(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mu = 0.0;
    for (double x : xs) mu += x;
    mu /= n;
    double var = 0.0;
    for (double x : xs) var += (x - mu) * (x - mu);
    var /= std::max(1.0, n - 1.0);
    return {mu, std::sqrt(var / n)};
}

// Masked Fourier squared error: sum_k u_k |F(a - b)_k|^2 with u in {0,1,4}.
double masked_fourier_sse(const Volume& a, const Volume& b, const std::vector<double>& u) {
    Volume diff = a;
    for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= b.data[i];
    SpectralVolume fd = to_fourier(diff);
    double s = 0.0;
    for (std::size_t i = 0; i < fd.data.size(); ++i) s += u[i] * std::norm(fd.data[i]);
    return s;
}

}  // namespace

GapEstimate noise2noise_gap(const std::function<Volume(const Volume&)>& f, const Volume& x_star,
                            double noise_sigma, std::int64_t trials, std::uint64_t seed) {
    if (trials < 1) throw invalid_input("noise2noise_gap: trials must be >= 1");
    std::vector<double> per_trial(static_cast<std::size_t>(trials));
    for (std::int64_t t = 0; t < trials; ++t) {
        std::mt19937_64 rng(mix_seed(seed, 0x92a9, static_cast<std::uint64_t>(t)));
        Volume n0 = gaussian_volume(x_star.dims, x_star.voxel_size, noise_sigma, rng);
        Volume n1 = gaussian_volume(x_star.dims, x_star.voxel_size, noise_sigma, rng);
        Volume y0 = x_star;
        for (std::size_t i = 0; i < y0.data.size(); ++i) y0.data[i] += n0.data[i];
        Volume y1 = x_star;
        for (std::size_t i = 0; i < y1.data.size(); ++i) y1.data[i] += n1.data[i];
        const Volume fy = f(y0);
        per_trial[static_cast<std::size_t>(t)] = sq_norm_diff(fy, y1) - sq_norm_diff(fy, x_star);
    }
    const MeanSe ms = mean_and_se(per_trial);
    return {ms.mean, ms.se, trials};
}

GapComparison noise2noise_gap_pair(const std::function<Volume(const Volume&)>& f1,
                                   const std::function<Volume(const Volume&)>& f2,
                                   const Volume& x_star, double noise_sigma, std::int64_t trials,
                                   std::uint64_t seed) {
    if (trials < 1) throw invalid_input("noise2noise_gap_pair: trials must be >= 1");
    std::vector<double> g1(static_cast<std::size_t>(trials)), g2(g1.size()), diff(g1.size());
    for (std::int64_t t = 0; t < trials; ++t) {
        // common random numbers: both maps see the same draws
        std::mt19937_64 rng(mix_seed(seed, 0x92a9, static_cast<std::uint64_t>(t)));
        Volume y0 = x_star, y1 = x_star;
        {
            Volume n0 = gaussian_volume(x_star.dims, x_star.voxel_size, noise_sigma, rng);
            Volume n1 = gaussian_volume(x_star.dims, x_star.voxel_size, noise_sigma, rng);
            for (std::size_t i = 0; i < y0.data.size(); ++i) y0.data[i] += n0.data[i];
            for (std::size_t i = 0; i < y1.data.size(); ++i) y1.data[i] += n1.data[i];
        }
        const Volume a = f1(y0), b = f2(y0);
        const std::size_t ti = static_cast<std::size_t>(t);
        g1[ti] = sq_norm_diff(a, y1) - sq_norm_diff(a, x_star);
        g2[ti] = sq_norm_diff(b, y1) - sq_norm_diff(b, x_star);
        diff[ti] = g1[ti] - g2[ti];
    }
    GapComparison out;
    MeanSe m1 = mean_and_se(g1), m2 = mean_and_se(g2), md = mean_and_se(diff);
    out.first = {m1.mean, m1.se, trials};
    out.second = {m2.mean, m2.se, trials};
    out.diff = md.mean;
    out.diff_se = md.se;
    return out;
}

Prop1Report prop1_check(const std::vector<Model>& models, const MaskPairDistribution& dist,
                        const Volume& x_star, double noise0_sigma, double noise1_sigma,
                        std::int64_t trials, std::uint64_t seed) {
    if (models.empty()) throw invalid_input("prop1_check: at least one model required");
    if (trials < 1) throw invalid_input("prop1_check: trials must be >= 1");
    dist.validate();
    if (!dist.is_symmetric())
        throw invalid_input("prop1_check: mask distribution must be symmetric");

    struct PairWeights {
        FourierMask product;       // M~ M, the input mask
        FourierMask m;             // target-side mask
        std::vector<double> u_loss;  // (M~ M + 2 M~^C M)^2 per bin
        std::vector<double> u_sup;   // union mask I - M~^C M^C per bin
        double prob;
    };
    std::vector<PairWeights> pws;
    for (const auto& e : dist.entries) {
        PairWeights p;
        p.product = intersect(e.m, e.m_tilde);
        p.m = e.m;
        p.prob = e.prob;
        p.u_loss.resize(e.m.keep.size());
        p.u_sup.resize(e.m.keep.size());
        for (std::size_t i = 0; i < e.m.keep.size(); ++i) {
            const int m = e.m.keep[i], mt = e.m_tilde.keep[i];
            // Energy weight 2 on the M~^C M band: the identity being
            // verified symmetrizes that band with its swap, so its squared
            // norm enters twice (not four times).
            p.u_loss[i] = mt && m ? 1.0 : (!mt && m ? 2.0 : 0.0);
            p.u_sup[i] = (m || mt) ? 1.0 : 0.0;
        }
        pws.push_back(std::move(p));
    }

    const std::size_t nm = models.size();
    std::vector<std::vector<double>> loss_t(nm, std::vector<double>(static_cast<std::size_t>(trials)));
    std::vector<std::vector<double>> sup_t = loss_t;

    parallel_chunks(trials, 0, [&](std::int64_t t0, std::int64_t t1) {
        for (std::int64_t t = t0; t < t1; ++t) {
            // one noise draw per trial, shared by every model and mask pair
            std::mt19937_64 rng(mix_seed(seed, 0x9201, static_cast<std::uint64_t>(t)));
            Volume raw0 = x_star, raw1 = x_star;
            {
                Volume n0 = gaussian_volume(x_star.dims, x_star.voxel_size, noise0_sigma, rng);
                Volume n1 = gaussian_volume(x_star.dims, x_star.voxel_size, noise1_sigma, rng);
                for (std::size_t i = 0; i < raw0.data.size(); ++i) raw0.data[i] += n0.data[i];
                for (std::size_t i = 0; i < raw1.data.size(); ++i) raw1.data[i] += n1.data[i];
            }
            for (std::size_t mi = 0; mi < nm; ++mi) {
                double lsum = 0.0, rsum = 0.0;
                for (const auto& p : pws) {
                    const Volume y0_tilde = apply_wedge(raw0, p.product);
                    const Volume y1 = apply_wedge(raw1, p.m);
                    const Volume pred = forward(models[mi], y0_tilde, /*train_mode=*/false);
                    lsum += p.prob * masked_fourier_sse(pred, y1, p.u_loss);
                    rsum += p.prob * masked_fourier_sse(pred, x_star, p.u_sup);
                }
                loss_t[mi][static_cast<std::size_t>(t)] = lsum;
                sup_t[mi][static_cast<std::size_t>(t)] = rsum;
            }
        }
    });

    Prop1Report report;
    report.trials = trials;
    for (std::size_t mi = 0; mi < nm; ++mi) {
        std::vector<double> gap(static_cast<std::size_t>(trials));
        for (std::size_t t = 0; t < gap.size(); ++t) gap[t] = loss_t[mi][t] - sup_t[mi][t];
        const MeanSe ml = mean_and_se(loss_t[mi]);
        const MeanSe mr = mean_and_se(sup_t[mi]);
        const MeanSe mg = mean_and_se(gap);
        report.models.push_back({ml.mean, mr.mean, mg.mean, mg.se});
    }
    if (nm >= 2) {
        std::vector<double> d(static_cast<std::size_t>(trials));
        for (std::size_t t = 0; t < d.size(); ++t)
            d[t] = (loss_t[0][t] - sup_t[0][t]) - (loss_t[1][t] - sup_t[1][t]);
        const MeanSe md = mean_and_se(d);
        report.model_diff = md.mean;
        report.model_diff_se = md.se;
    }
    return report;
}

}  // namespace dewedge
