#include <algorithm>
#include <cmath>
#include <numeric>

#include "stlsynth/gp.hpp"

namespace stlsynth {

// Separable CMA-ES over the constant leaves of one individual: diagonal
// covariance only, which keeps each update linear in the number of
// parameters. Elitist: the best-ever parameter vector is written back, so
// the returned fitness never drops below the input's.
Individual es_refine(const Grammar& g, const Individual& ind, const FitnessFn& fitness,
                     int generations, std::mt19937_64& rng) {
    std::vector<double> theta = get_constants(ind.geno);
    const int n = static_cast<int>(theta.size());
    if (n == 0 || generations <= 0) return ind;

    Individual best = ind;
    if (!best.evaluated) {
        best.fitness = fitness(best);
        best.evaluated = true;
    }

    const int lambda = 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
    const int mu = lambda / 2;
    std::vector<double> weights(mu);
    for (int i = 0; i < mu; ++i) weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
    double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= wsum;
    double mu_eff = 0.0;
    for (double w : weights) mu_eff += w * w;
    mu_eff = 1.0 / mu_eff;

    const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    const double d_sigma =
        1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
    const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    // separable variant: the diagonal restriction admits a faster learning rate
    const double sep_boost = (n + 2.0) / 3.0;
    const double c_1 = std::min(1.0, sep_boost * 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff));
    const double c_mu = std::min(
        1.0 - c_1,
        sep_boost * 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) * (n + 2.0) + mu_eff));
    const double chi_n = std::sqrt(static_cast<double>(n)) *
                         (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    std::vector<double> mean = theta;
    std::vector<double> C(n, 1.0);            // diagonal covariance
    std::vector<double> p_sigma(n, 0.0), p_c(n, 0.0);
    double sigma = 0.3 * 2.0;                 // 0.3 x the [-1,1] constant range

    std::normal_distribution<double> N01(0.0, 1.0);

    struct Sample {
        std::vector<double> z, x;
        double fit;
    };

    for (int gen = 0; gen < generations; ++gen) {
        std::vector<Sample> samples(lambda);
        for (auto& s : samples) {
            s.z.resize(n);
            s.x.resize(n);
            for (int j = 0; j < n; ++j) {
                s.z[j] = N01(rng);
                s.x[j] = mean[j] + sigma * std::sqrt(C[j]) * s.z[j];
            }
            Individual cand = ind;
            set_constants(cand.geno, s.x);
            cand.evaluated = false;
            s.fit = fitness(cand);
            if (s.fit > best.fitness) {
                best = cand;
                best.fitness = s.fit;
                best.evaluated = true;
            }
        }
        std::vector<int> order(lambda);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return samples[a].fit > samples[b].fit; });

        std::vector<double> new_mean(n, 0.0), z_w(n, 0.0);
        for (int i = 0; i < mu; ++i)
            for (int j = 0; j < n; ++j) {
                new_mean[j] += weights[i] * samples[order[i]].x[j];
                z_w[j] += weights[i] * samples[order[i]].z[j];
            }

        double ps_norm2 = 0.0;
        for (int j = 0; j < n; ++j) {
            p_sigma[j] = (1.0 - c_sigma) * p_sigma[j] +
                         std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * z_w[j];
            ps_norm2 += p_sigma[j] * p_sigma[j];
        }
        double ps_norm = std::sqrt(ps_norm2);
        bool h_sigma = ps_norm / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * (gen + 1))) <
                       (1.4 + 2.0 / (n + 1.0)) * chi_n;

        for (int j = 0; j < n; ++j) {
            double y_w = (new_mean[j] - mean[j]) / sigma;
            p_c[j] = (1.0 - c_c) * p_c[j] +
                     (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w : 0.0);
            double rank_mu = 0.0;
            for (int i = 0; i < mu; ++i) {
                double y = (samples[order[i]].x[j] - mean[j]) / sigma;
                rank_mu += weights[i] * y * y;
            }
            C[j] = (1.0 - c_1 - c_mu) * C[j] +
                   c_1 * (p_c[j] * p_c[j] + (h_sigma ? 0.0 : c_c * (2.0 - c_c) * C[j])) +
                   c_mu * rank_mu;
            C[j] = std::max(C[j], 1e-20);
        }
        mean = new_mean;
        sigma *= std::exp(c_sigma / d_sigma * (ps_norm / chi_n - 1.0));
        sigma = std::clamp(sigma, 1e-12, 1e6);
    }
    return best;
}

std::vector<int> pareto_rank(const std::vector<std::pair<double, double>>& objectives) {
    const int n = static_cast<int>(objectives.size());
    auto dominates = [&](int a, int b) {
        bool geq = objectives[a].first >= objectives[b].first &&
                   objectives[a].second >= objectives[b].second;
        bool gt = objectives[a].first > objectives[b].first ||
                  objectives[a].second > objectives[b].second;
        return geq && gt;
    };
    std::vector<int> rank(n, -1);
    int assigned = 0, current = 0;
    std::vector<bool> done(n, false);
    while (assigned < n) {
        std::vector<int> front;
        for (int i = 0; i < n; ++i) {
            if (done[i]) continue;
            bool dominated = false;
            for (int j = 0; j < n; ++j)
                if (!done[j] && j != i && dominates(j, i)) { dominated = true; break; }
            if (!dominated) front.push_back(i);
        }
        for (int i : front) {
            rank[i] = current;
            done[i] = true;
            ++assigned;
        }
        ++current;
    }
    return rank;
}

}  // namespace stlsynth
