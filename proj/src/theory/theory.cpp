#include "mmseg/theory/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmseg::theory {

std::size_t DiscreteJoint::total() const {
    std::size_t n = 1;
    for (int s : sizes) n *= static_cast<std::size_t>(s);
    return n;
}

void DiscreteJoint::validate() const {
    if (pmf.size() != total()) throw std::invalid_argument("DiscreteJoint: size mismatch");
    double mass = 0.0;
    for (double p : pmf) {
        if (p < 0.0) throw std::invalid_argument("DiscreteJoint: negative entry");
        mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-12)
        throw std::invalid_argument("DiscreteJoint: mass not 1");
}

double kl_gaussian(double mu1, double sigma1, double mu2, double sigma2) {
    if (sigma1 <= 0.0 || sigma2 <= 0.0)
        throw std::invalid_argument("kl_gaussian: nonpositive sigma");
    const double dm = mu1 - mu2;
    return std::log(sigma2 / sigma1) +
           (sigma1 * sigma1 + dm * dm) / (2.0 * sigma2 * sigma2) - 0.5;
}

McEstimate mc_kl_estimate(const std::function<double(Rng&)>& sample_p,
                          const std::function<double(double)>& log_p,
                          const std::function<double(double)>& log_q, std::size_t n,
                          Rng& rng) {
    if (n < 1000) throw std::invalid_argument("mc_kl_estimate: n must be >= 1000");
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = sample_p(rng);
        const double lq = log_q(x);
        if (!std::isfinite(lq))
            throw std::runtime_error("mc_kl_estimate: q has zero density at a sample");
        const double v = log_p(x) - lq;
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double variance = m2 / static_cast<double>(n - 1);
    return {mean, std::sqrt(variance / static_cast<double>(n))};
}

namespace {

// Marginalize a joint pmf onto a subset of axes.
std::vector<double> marginal(const DiscreteJoint& joint, const std::vector<int>& axes) {
    std::size_t out_size = 1;
    for (int a : axes) out_size *= static_cast<std::size_t>(joint.sizes.at(a));
    std::vector<double> out(out_size, 0.0);

    const int rank = static_cast<int>(joint.sizes.size());
    std::vector<int> idx(rank, 0);
    for (std::size_t flat = 0; flat < joint.pmf.size(); ++flat) {
        std::size_t rem = flat;
        for (int a = rank - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(rem % joint.sizes[a]);
            rem /= joint.sizes[a];
        }
        std::size_t o = 0;
        for (int a : axes) o = o * joint.sizes[a] + idx[a];
        out[o] += joint.pmf[flat];
    }
    return out;
}

void check_axes(const DiscreteJoint& joint, const std::vector<int>& axes_a,
                const std::vector<int>& axes_b) {
    const int rank = static_cast<int>(joint.sizes.size());
    std::vector<int> seen(rank, 0);
    for (int a : axes_a) {
        if (a < 0 || a >= rank || seen[a]++) throw std::invalid_argument("mi: bad axes");
    }
    for (int b : axes_b) {
        if (b < 0 || b >= rank || seen[b]++) throw std::invalid_argument("mi: bad axes");
    }
    if (axes_a.empty() || axes_b.empty()) throw std::invalid_argument("mi: empty axis group");
}

}  // namespace

double mi_discrete(const DiscreteJoint& joint, const std::vector<int>& axes_a,
                   const std::vector<int>& axes_b) {
    joint.validate();
    check_axes(joint, axes_a, axes_b);

    std::vector<int> axes_ab = axes_a;
    axes_ab.insert(axes_ab.end(), axes_b.begin(), axes_b.end());
    const auto p_ab = marginal(joint, axes_ab);
    const auto p_a = marginal(joint, axes_a);
    const auto p_b = marginal(joint, axes_b);

    std::size_t size_b = 1;
    for (int b : axes_b) size_b *= static_cast<std::size_t>(joint.sizes[b]);

    double mi = 0.0;
    for (std::size_t ia = 0; ia < p_a.size(); ++ia) {
        for (std::size_t ib = 0; ib < size_b; ++ib) {
            const double p = p_ab[ia * size_b + ib];
            if (p <= 0.0) continue;
            mi += p * std::log(p / (p_a[ia] * p_b[ib]));
        }
    }
    return std::max(mi, 0.0);
}

VerificationRecord check_single_letterization(int trials, int j_count, int max_alphabet,
                                              std::uint64_t seed) {
    if (j_count < 2) throw std::invalid_argument("check_single_letterization: J must be >= 2");
    if (max_alphabet < 2 || max_alphabet > 4)
        throw std::invalid_argument("check_single_letterization: alphabet must be in [2,4]");

    VerificationRecord record;
    record.max_slack = -1e300;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(mix_seed(seed, 0x51e7 + static_cast<std::uint64_t>(trial)));

        std::vector<int> sizes(1 + j_count);
        for (auto& s : sizes) s = 2 + static_cast<int>(rng.uniform_index(max_alphabet - 1));
        const int a_size = sizes[0];

        // independent modality marginals
        std::vector<std::vector<double>> pz(j_count);
        for (int j = 0; j < j_count; ++j) {
            pz[j].resize(sizes[1 + j]);
            double mass = 0.0;
            for (auto& p : pz[j]) {
                p = rng.uniform(0.05, 1.0);
                mass += p;
            }
            for (auto& p : pz[j]) p /= mass;
        }

        // A = random stochastic function of (Z_1..Z_J)
        std::size_t z_total = 1;
        for (int j = 0; j < j_count; ++j) z_total *= static_cast<std::size_t>(sizes[1 + j]);
        std::vector<double> cond(static_cast<std::size_t>(a_size) * z_total);
        for (std::size_t z = 0; z < z_total; ++z) {
            double mass = 0.0;
            for (int a = 0; a < a_size; ++a) {
                cond[a * z_total + z] = rng.uniform(0.05, 1.0);
                mass += cond[a * z_total + z];
            }
            for (int a = 0; a < a_size; ++a) cond[a * z_total + z] /= mass;
        }

        DiscreteJoint joint;
        joint.sizes = sizes;
        joint.pmf.resize(static_cast<std::size_t>(a_size) * z_total);
        for (std::size_t z = 0; z < z_total; ++z) {
            double pzj = 1.0;
            std::size_t rem = z;
            for (int j = j_count - 1; j >= 0; --j) {
                pzj *= pz[j][rem % sizes[1 + j]];
                rem /= sizes[1 + j];
            }
            for (int a = 0; a < a_size; ++a) {
                joint.pmf[a * z_total + z] = cond[a * z_total + z] * pzj;
            }
        }

        std::vector<int> all_z(j_count);
        for (int j = 0; j < j_count; ++j) all_z[j] = 1 + j;
        const double rhs = mi_discrete(joint, {0}, all_z);
        double lhs = 0.0;
        for (int j = 0; j < j_count; ++j) lhs += mi_discrete(joint, {0}, {1 + j});

        TrialRow row{lhs, rhs, rhs - lhs, 0.0};
        record.rows.push_back(row);
        record.max_slack = std::max(record.max_slack, lhs - rhs);
        if (lhs > rhs + 1e-9) ++record.violations;
        ++record.trials;
    }
    return record;
}

VerificationRecord check_elbo_tightness(int trials, int j_count, std::uint64_t seed,
                                        std::size_t n_mc) {
    if (j_count < 1) throw std::invalid_argument("check_elbo_tightness: J must be >= 1");

    VerificationRecord record;
    record.max_slack = -1e300;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(mix_seed(seed, 0xe1b0 + static_cast<std::uint64_t>(trial)));
        const int J = j_count;

        std::vector<double> mu(J), sigma(J), anchor_mu(J), anchor_sigma(J);
        std::vector<double> beta(J), target(J), offset(J);
        for (int j = 0; j < J; ++j) {
            mu[j] = rng.uniform(-1.0, 1.0);
            sigma[j] = rng.uniform(0.5, 2.0);
            anchor_mu[j] = rng.uniform(-0.5, 0.5);
            anchor_sigma[j] = rng.uniform(0.7, 1.5);
            beta[j] = rng.uniform(0.1, 1.0);
            target[j] = rng.uniform(-1.0, 1.0);
            offset[j] = rng.uniform(0.0, 0.5);
        }

        // Joint posterior = product of the per-modality marginals (the
        // modality-independence assumption). The joint predictor sees every
        // coordinate, so its log-likelihood surrogate is the best per-modality
        // score; the per-modality surrogates are nonpositive quadratics.
        auto loglik_j = [&](int j, double z) {
            const double d = z - target[j];
            return -beta[j] * d * d - offset[j];
        };

        // LHS: per-modality Monte Carlo likelihood terms + closed-form KLs
        double lhs = 0.0, lhs_var = 0.0;
        for (int j = 0; j < J; ++j) {
            double mean = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < n_mc; ++i) {
                const double z = mu[j] + sigma[j] * rng.normal();
                const double v = loglik_j(j, z);
                const double delta = v - mean;
                mean += delta / static_cast<double>(i + 1);
                m2 += delta * (v - mean);
            }
            lhs += mean - kl_gaussian(mu[j], sigma[j], anchor_mu[j], anchor_sigma[j]);
            lhs_var += m2 / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc);
        }

        // RHS: joint Monte Carlo likelihood (best per-modality score) plus the
        // KL of the stacked posterior, which factorizes over modalities.
        double mean = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n_mc; ++i) {
            double v = -1e300;
            for (int j = 0; j < J; ++j) {
                const double z = mu[j] + sigma[j] * rng.normal();
                v = std::max(v, loglik_j(j, z));
            }
            const double delta = v - mean;
            mean += delta / static_cast<double>(i + 1);
            m2 += delta * (v - mean);
        }
        const double rhs_var = m2 / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc);

        double kl_joint = 0.0;
        for (int j = 0; j < J; ++j) {
            kl_joint += kl_gaussian(mu[j], sigma[j], anchor_mu[j], anchor_sigma[j]);
        }

        const double rhs = mean - kl_joint;
        const double se = std::sqrt(lhs_var + rhs_var);

        TrialRow row{lhs, rhs, rhs - lhs, se};
        record.rows.push_back(row);
        record.max_slack = std::max(record.max_slack, lhs - rhs);
        if (lhs > rhs + 3.0 * se) ++record.violations;
        ++record.trials;
    }
    return record;
}

}  // namespace mmseg::theory
