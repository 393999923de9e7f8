#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mmseg/core/rng.hpp"

namespace mmseg::theory {

// Dense joint pmf over a grid of discrete axes; axis 0 is conventionally the
// anchor variable A and axes 1..J the modality variables.
struct DiscreteJoint {
    std::vector<int> sizes;
    std::vector<double> pmf;  // row-major over sizes

    std::size_t total() const;
    void validate() const;  // nonnegative, mass 1 +- 1e-12
};

// ln(s2/s1) + (s1^2 + (m1-m2)^2) / (2 s2^2) - 1/2
double kl_gaussian(double mu1, double sigma1, double mu2, double sigma2);

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

// Monte Carlo KL(P||Q) from a sampler for P and both log-densities.
McEstimate mc_kl_estimate(const std::function<double(Rng&)>& sample_p,
                          const std::function<double(double)>& log_p,
                          const std::function<double(double)>& log_q, std::size_t n,
                          Rng& rng);

// Mutual information between two disjoint axis groups of a discrete joint.
double mi_discrete(const DiscreteJoint& joint, const std::vector<int>& axes_a,
                   const std::vector<int>& axes_b);

struct TrialRow {
    double lhs = 0.0, rhs = 0.0, gap = 0.0, se = 0.0;
};

struct VerificationRecord {
    int trials = 0;
    int violations = 0;
    double max_slack = 0.0;  // max over trials of lhs - rhs
    std::vector<TrialRow> rows;
};

// Draws random models with mutually independent Z_1..Z_J and an anchor
// variable A that is a random stochastic function of them, then checks
// sum_j I(A;Z_j) <= I(A;(Z_1..Z_J)) by exact enumeration.
VerificationRecord check_single_letterization(int trials, int j_count, int max_alphabet,
                                              std::uint64_t seed);

// Draws random Gaussian models (joint posterior taken as the product of the
// trial's per-modality marginals, a diagonal Gaussian anchor, quadratic
// log-likelihood surrogates) and checks by Monte Carlo that the per-modality
// objective sum stays below the joint objective at 3 combined standard errors.
VerificationRecord check_elbo_tightness(int trials, int j_count, std::uint64_t seed,
                                        std::size_t n_mc = 10000);

}  // namespace mmseg::theory
